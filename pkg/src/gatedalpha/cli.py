"""Command-line entry point: ``gatedalpha {gen-data,alphas,train,eval}``.

Flags override values from ``--config`` (a nested YAML document), which in
turn override the built-in defaults shown in each subcommand's ``--help``.
Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from . import config as config_mod
from .errors import ConfigError, DataError, NumericError, ShapeError
from .models import MODEL_KINDS
from .panel import save_panel

logger = logging.getLogger("gatedalpha")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default(dotted: str):
    node = config_mod.DEFAULTS
    for part in dotted.split("."):
        node = node[part]
    return node


def _opt(p: argparse.ArgumentParser, flag: str, key: str, help: str, **kw) -> None:
    """Add a flag that overrides config key ``key``; its help shows the config default."""
    shown = _default(key)
    if shown is None:
        shown = "none"
    if kw.get("action") is None and "choices" not in kw:
        kw["metavar"] = flag.lstrip("-").replace("-", "_").upper()
    p.add_argument(flag, dest=key, default=None, help=f"{help} [config {key}; default: {shown}]", **kw)


def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="YAML run config; flags override its values [default: none]")


def _add_data_opts(p: argparse.ArgumentParser) -> None:
    _opt(p, "--data", "data.source", "panel CSV to load instead of generating synthetic data")
    _opt(p, "--tickers", "data.synthetic.tickers", "synthetic ticker count", type=int)
    _opt(p, "--days", "data.synthetic.days", "synthetic trading-day count", type=int)
    _opt(p, "--data-seed", "data.synthetic.seed", "synthetic data seed", type=int)


def _add_alpha_opts(p: argparse.ArgumentParser) -> None:
    _opt(p, "--alphas", "alphas.file", "alpha definition file (name: expression per line); none uses the starter library")
    _opt(
        p,
        "--standardize",
        "alphas.standardize",
        "cross-sectional z-scoring of every factor",
        action=argparse.BooleanOptionalAction,
    )
    _opt(p, "--alpha-jobs", "alphas.jobs", "threads used to evaluate the alpha library", type=int)


def _add_label_opts(p: argparse.ArgumentParser) -> None:
    _opt(p, "--horizon", "label.horizon", "label horizon in trading days", type=int)
    _opt(p, "--benchmark", "label.benchmark", "excess-return benchmark", choices=["market_mean", "beta_adjusted"])
    _opt(p, "--weighting", "label.weighting", "market portfolio weighting", choices=["equal", "cap"])
    _opt(p, "--test-days", "split.test_days", "trailing labeled dates held out for test", type=int)
    _opt(p, "--valid-fraction", "split.valid_fraction", "fraction of remaining samples used for validation", type=float)
    _opt(p, "--split-seed", "split.seed", "validation sampling seed", type=int)


def _add_out(p: argparse.ArgumentParser, what: str) -> None:
    _opt(p, "--out", "output.dir", what)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="gatedalpha",
        description="Alpha factors and deep MLP excess-return classifiers.",
        epilog="Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 numeric failure.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="write a synthetic market panel CSV")
    _add_config(p)
    _opt(p, "--tickers", "data.synthetic.tickers", "number of tickers", type=int)
    _opt(p, "--days", "data.synthetic.days", "number of trading days (at least 30)", type=int)
    _opt(p, "--seed", "data.synthetic.seed", "generator seed", type=int)
    _add_out(p, "output directory (panel.csv is written inside) or a .csv file path")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("alphas", help="evaluate an alpha library into factor files")
    _add_config(p)
    _add_data_opts(p)
    _add_alpha_opts(p)
    p.add_argument(
        "--format",
        choices=["long", "wide"],
        default="long",
        help="long: one factors.csv (date,ticker,factor,value); wide: one CSV per factor [default: long]",
    )
    _add_out(p, "output directory")
    p.set_defaults(func=cmd_alphas)

    p = sub.add_parser("train", help="train one model kind, or all five with --all-models")
    _add_config(p)
    _add_data_opts(p)
    _add_alpha_opts(p)
    _add_label_opts(p)
    _opt(p, "--model", "model.kind", "model kind", choices=MODEL_KINDS)
    p.add_argument("--all-models", action="store_true", help="train every model kind and write a comparison table [default: off]")
    p.add_argument("--jobs", type=int, default=1, help="parallel model runs with --all-models [default: 1]")
    _opt(p, "--d", "model.d", "residual stream width", type=int)
    _opt(p, "--m", "model.m", "block expansion ratio", type=int)
    _opt(p, "--k", "model.k", "gate bottleneck ratio", type=int)
    _opt(p, "--blocks", "model.blocks", "number of feed-forward blocks", type=int)
    _opt(p, "--dropout", "model.dropout", "dropout probability inside blocks", type=float)
    _opt(p, "--gate-placement", "model.gate_placement", "gate position", choices=["final", "per_block"])
    _opt(p, "--epochs", "train.epochs", "training epochs", type=int)
    _opt(p, "--batch-size", "train.batch_size", "mini-batch size", type=int)
    _opt(p, "--validate-every", "train.validate_every", "steps between validations", type=int)
    _opt(p, "--lr", "train.lr", "Adam learning rate", type=float)
    _opt(p, "--loss-mode", "train.loss_mode", "training objective", choices=["bce", "bce_plus_ic", "ic_only"])
    _opt(p, "--ic-lambda", "train.ic_lambda", "weight of the factor-correlation penalty", type=float)
    _opt(p, "--seed", "train.seed", "initialization and batching seed", type=int)
    _add_out(p, "run directory (one subdirectory per model with --all-models)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a split with a saved checkpoint")
    p.add_argument("checkpoint", help="checkpoint.bin written by train")
    p.add_argument(
        "--config",
        default=None,
        help="run config describing the data [default: config.echo next to the checkpoint]",
    )
    _add_data_opts(p)
    p.add_argument("--split", choices=["train", "valid", "test"], default="test", help="samples to score [default: test]")
    p.add_argument("--scores", default=None, help="score CSV path [default: eval_scores.csv next to the checkpoint]")
    p.set_defaults(func=cmd_eval)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if "." in k and v is not None}


def _setup_log(directory: Path) -> None:
    """Timestamps go only to run.log; every other output is timestamp-free."""
    directory.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(directory / "run.log", mode="a", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("gatedalpha")
    root.setLevel(logging.INFO)
    root.addHandler(handler)


def cmd_gen_data(args, cfg: dict) -> int:
    from .pipeline import load_data

    cfg["data"]["source"] = None
    out = Path(cfg["output"]["dir"])
    target = out if out.suffix == ".csv" else out / "panel.csv"
    _setup_log(target.parent)
    panel = load_data(cfg)
    save_panel(panel, target)
    logger.info("wrote %s (%d dates x %d tickers)", target, *panel.shape)
    print(target)
    return EXIT_OK


def cmd_alphas(args, cfg: dict) -> int:
    from .pipeline import compute_factors, load_data

    out = Path(cfg["output"]["dir"])
    _setup_log(out)
    (out / "config.echo").write_text(config_mod.dump_config(cfg), encoding="utf-8")
    panel = load_data(cfg)
    fm = compute_factors(cfg, panel)
    if args.format == "long":
        path = out / "factors.csv"
        fm.save_long_csv(path)
    else:
        path = out / "factors"
        fm.save_per_factor(path)
    logger.info("wrote %d factors to %s", fm.n_factors, path)
    print(path)
    return EXIT_OK


def cmd_train(args, cfg: dict) -> int:
    from .pipeline import comparison_table, run_benchmark, run_one

    out = Path(cfg["output"]["dir"])
    _setup_log(out)
    if args.all_models:
        (out / "config.echo").parent.mkdir(parents=True, exist_ok=True)
        (out / "config.echo").write_text(config_mod.dump_config(cfg), encoding="utf-8")
        summaries = run_benchmark(cfg, out, jobs=max(1, args.jobs))
        sys.stdout.write(comparison_table(summaries))
    else:
        record = run_one(cfg, cfg["model"]["kind"], out)
        print(json.dumps(record.summary()))
    return EXIT_OK


def cmd_eval(args, cfg: dict) -> int:
    from .pipeline import prepare, split_indices
    from .train import evaluate

    ckpt = Path(args.checkpoint)
    scores = Path(args.scores) if args.scores else ckpt.parent / "eval_scores.csv"
    prepared = prepare(cfg)
    auc, s = evaluate(ckpt, prepared.features, prepared.labels, split_indices(prepared, args.split), scores)
    print(json.dumps({"split": args.split, "auc": auc, "n": int(len(s)), "scores": str(scores)}))
    return EXIT_OK


def _resolve_config(args) -> dict:
    path = args.config
    if args.command == "eval":
        ckpt = Path(args.checkpoint)
        if not ckpt.is_file():
            raise DataError(f"checkpoint not found: {ckpt}")
        if path is None:
            echo = ckpt.parent / "config.echo"
            if not echo.is_file():
                raise ConfigError(f"no --config given and {echo} does not exist")
            path = echo
    return config_mod.load_config(path, _overrides(args))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"gatedalpha: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ShapeError) as exc:
        print(f"gatedalpha: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"gatedalpha: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        for h in list(logging.getLogger("gatedalpha").handlers):
            if isinstance(h, logging.FileHandler):
                h.close()
                logging.getLogger("gatedalpha").removeHandler(h)


if __name__ == "__main__":
    sys.exit(main())
