"""The five benchmark architectures assembled from :mod:`gatedalpha.nn` parts.

=================  ==========================================================
kind               layers
=================  ==========================================================
linear             head: input_dim -> 1
simple_mlp         input_dim -> d, ReLU, head d -> 1
stack_mlp          embed input_dim -> d, blocks x [d -> m*d, ReLU, m*d -> d],
                   head
deep_mlp           embed, blocks x residual [BN, d -> m*d, ReLU, dropout,
                   m*d -> d], head
gated_deep_mlp     deep_mlp plus a d -> d/k -> d sigmoid gate after the last
                   block (``final``) or after every block (``per_block``)
=================  ==========================================================
"""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.layers import FeedForwardBlock, GatedActivation, Layer, Linear, Param, ReLU

MODEL_KINDS = ("linear", "simple_mlp", "stack_mlp", "deep_mlp", "gated_deep_mlp")


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "gated_deep_mlp"
    input_dim: int = 101
    d: int = 512
    m: int = 4
    k: int = 8
    blocks: int = 5
    dropout: float = 0.15
    gate_placement: str = "final"
    gate_mid_relu: bool = False

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.input_dim < 1 or self.d < 1 or self.m < 1:
            raise ConfigError("input_dim, d and m must be positive")
        if self.k < 1 or self.d % self.k != 0:
            raise ConfigError(f"k={self.k} must divide d={self.d}")
        if self.blocks < 1:
            raise ConfigError(f"blocks must be >= 1, got {self.blocks}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.gate_placement not in ("final", "per_block"):
            raise ConfigError(f"gate_placement must be 'final' or 'per_block', got {self.gate_placement!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model spec keys: {sorted(unknown)}")
        return cls(**data)


def _layer_rng(seed: int, name: str) -> np.random.Generator:
    # keyed by name so shared layers match across architectures built from one seed
    return np.random.default_rng([seed, zlib.crc32(name.encode("utf-8"))])


class ModelGraph:
    """Ordered layers, a parameter registry, and a linear head producing one logit."""

    def __init__(self, spec: ModelSpec, layers: list[tuple[str, Layer]], head: Linear, feature_layer: str | None):
        self.spec = spec
        self.layers = layers
        self.head = head
        self.feature_layer = feature_layer
        self._features = None
        self.registry: dict[str, Param] = {}
        self.buffer_registry: dict[str, np.ndarray] = {}
        for name, layer in layers + [("head", head)]:
            self._register(name, layer)

    def _register(self, prefix: str, layer: Layer) -> None:
        children = getattr(layer, "children", None)
        if children is not None:
            for cname, child in children().items():
                self._register(f"{prefix}.{cname}", child)
            return
        for p in layer.params():
            p.name = f"{prefix}.{p.name.split('.')[-1]}"
            if p.name in self.registry:
                raise ConfigError(f"duplicate parameter name {p.name!r}")
            self.registry[p.name] = p
        for bname, buf in layer.buffers().items():
            self.buffer_registry[f"{prefix}.{bname}"] = buf

    # ------------------------------------------------------------------

    def params(self) -> list[Param]:
        return list(self.registry.values())

    def n_params(self) -> int:
        return int(sum(p.data.size for p in self.registry.values()))

    def zero_grad(self) -> None:
        for p in self.registry.values():
            p.zero_grad()

    def forward(self, X: np.ndarray, train: bool = False) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.spec.input_dim:
            raise ShapeError(f"expected features of shape (n, {self.spec.input_dim}), got {X.shape}")
        h = X
        self._features = None
        for name, layer in self.layers:
            h = layer.forward(h, train)
            if name == self.feature_layer:
                self._features = layer.features if isinstance(layer, FeedForwardBlock) else h
        return self.head.forward(h, train)

    def backward(self, grad_logits: np.ndarray, feature_grad: np.ndarray | None = None) -> np.ndarray:
        """Accumulate parameter gradients; ``feature_grad`` is added at the feature tensor."""
        g = self.head.backward(grad_logits)
        for name, layer in reversed(self.layers):
            inject = feature_grad if name == self.feature_layer else None
            if isinstance(layer, FeedForwardBlock):
                g = layer.backward(g, inject)
            else:
                if inject is not None:
                    g = g + inject
                g = layer.backward(g)
        return g

    @property
    def features(self) -> np.ndarray | None:
        """Generated-factor tensor from the most recent forward pass."""
        return self._features

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data for name, p in self.registry.items()}
        state.update(self.buffer_registry)
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, target in list(self.registry.items()) + list(self.buffer_registry.items()):
            if name not in state:
                raise DataError(f"state is missing tensor {name!r}")
            arr = target.data if isinstance(target, Param) else target
            src = np.asarray(state[name])
            if src.shape != arr.shape:
                raise ShapeError(f"tensor {name!r}: stored shape {src.shape}, model shape {arr.shape}")
            arr[...] = src

    def copy_state(self) -> dict[str, np.ndarray]:
        return {k: np.array(v, copy=True) for k, v in self.state_dict().items()}


def build(spec: ModelSpec, seed: int = 0) -> ModelGraph:
    """Construct a freshly initialized model; equal (spec, seed) give identical weights."""
    d, m = spec.d, spec.m
    layers: list[tuple[str, Layer]] = []
    feature_layer = None

    def dropout_rng(name: str):
        return _layer_rng(seed, name + ".dropout")

    if spec.kind == "linear":
        head = Linear(spec.input_dim, 1, _layer_rng(seed, "head"), "xavier")
        return ModelGraph(spec, layers, head, None)
    if spec.kind == "simple_mlp":
        layers.append(("hidden", Linear(spec.input_dim, d, _layer_rng(seed, "hidden"), "kaiming")))
        layers.append(("hidden_act", ReLU()))
        feature_layer = "hidden_act"
    else:
        layers.append(("embed", Linear(spec.input_dim, d, _layer_rng(seed, "embed"), "kaiming")))
        deep = spec.kind in ("deep_mlp", "gated_deep_mlp")
        for i in range(spec.blocks):
            name = f"blocks.{i}"
            block = FeedForwardBlock(
                d,
                m,
                dropout=spec.dropout if deep else 0.0,
                rng=_layer_rng(seed, name),
                batchnorm=deep,
                residual=deep,
                dropout_rng=dropout_rng(name),
            )
            layers.append((name, block))
            if spec.kind == "gated_deep_mlp" and spec.gate_placement == "per_block":
                gname = f"gates.{i}"
                layers.append((gname, GatedActivation(d, spec.k, _layer_rng(seed, gname), spec.gate_mid_relu)))
        feature_layer = f"blocks.{spec.blocks - 1}"
        if spec.kind == "gated_deep_mlp" and spec.gate_placement == "final":
            layers.append(("gate", GatedActivation(d, spec.k, _layer_rng(seed, "gate"), spec.gate_mid_relu)))
    head = Linear(d, 1, _layer_rng(seed, "head"), "xavier")
    return ModelGraph(spec, layers, head, feature_layer)


def predict_logits(model: ModelGraph, X: np.ndarray, train: bool = False) -> np.ndarray:
    """Raw scores of shape (n, 1); a positive logit predicts positive excess return."""
    return model.forward(X, train)


def predict_proba(model: ModelGraph, X: np.ndarray) -> np.ndarray:
    from .nn.layers import sigmoid

    return sigmoid(model.forward(X, False))


def extract_features(model: ModelGraph, X: np.ndarray, train: bool = False) -> np.ndarray:
    """Post-ReLU activations of the last expansion layer (width ``m*d``, or ``d`` for simple_mlp)."""
    if model.feature_layer is None:
        raise ConfigError(f"model kind {model.spec.kind!r} has no hidden features")
    model.forward(X, train)
    return model.features


def save_model(model: ModelGraph, path, extra_tensors: dict | None = None, header: dict | None = None) -> None:
    tensors = dict(model.state_dict())
    if extra_tensors:
        tensors.update(extra_tensors)
    meta = {"model_spec": model.spec.to_dict()}
    meta.update(header or {})
    save_checkpoint(path, tensors, meta)


def load_model(path) -> tuple[ModelGraph, dict, dict[str, np.ndarray]]:
    """Rebuild a model from a checkpoint; returns (model, header, all stored tensors)."""
    tensors, header = load_checkpoint(path)
    if "model_spec" not in header:
        raise DataError(f"{path}: checkpoint header has no model_spec")
    model = build(ModelSpec.from_dict(header["model_spec"]), seed=0)
    model.load_state_dict(tensors)
    return model, header, tensors
