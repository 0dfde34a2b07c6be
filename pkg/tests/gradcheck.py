"""Finite-difference gradient cases for every layer and loss.

Each case builds a random instance from a seed and returns the worst
norm-wise relative error between the analytic gradients (input and every
parameter) and central differences with h = 1e-5.  Instances with a ReLU
pre-activation or an absolute-value argument within 1e-3 of its kink are
redrawn, since the finite difference is not defined across a kink.
"""

from __future__ import annotations

import numpy as np

from gatedalpha.nn import (
    BatchNorm,
    Dropout,
    FeedForwardBlock,
    GatedActivation,
    Linear,
    ReLU,
    Sigmoid,
    bce_with_logits,
    ic_loss,
)
from helpers import numeric_grad, rel_error

KINK = 1e-3
N_SEEDS = 20


def _layer_error(layer, x, rng, train=True):
    out = layer.forward(x, train)
    R = rng.normal(size=out.shape)
    for p in layer.params():
        p.zero_grad()
    layer.forward(x, train)
    dx = layer.backward(R)

    def f():
        return float(np.sum(layer.forward(x, train) * R))

    errs = [rel_error(dx, numeric_grad(f, x))]
    for p in layer.params():
        errs.append(rel_error(p.grad.copy(), numeric_grad(f, p.data)))
    return max(errs)


def _away_from_kink(rng, shape, pre_fn, tries=100):
    for _ in range(tries):
        x = rng.normal(size=shape)
        if np.min(np.abs(pre_fn(x))) >= KINK:
            return x
    raise RuntimeError("could not draw an instance away from the kinks")


def case_linear(seed):
    rng = np.random.default_rng(seed)
    layer = Linear(3, 2, rng, "xavier")
    layer.b.data[:] = rng.normal(size=2)
    return _layer_error(layer, rng.normal(size=(4, 3)), rng)


def case_relu(seed):
    rng = np.random.default_rng(seed)
    x = _away_from_kink(rng, (5, 4), lambda x: x)
    return _layer_error(ReLU(), x, rng)


def case_sigmoid(seed):
    rng = np.random.default_rng(seed)
    return _layer_error(Sigmoid(), rng.normal(0, 3, size=(5, 4)), rng)


def case_batchnorm_train(seed):
    rng = np.random.default_rng(seed)
    bn = BatchNorm(4)
    bn.gamma.data[:] = rng.uniform(0.5, 2.0, 4)
    bn.beta.data[:] = rng.normal(size=4)
    return _layer_error(bn, rng.normal(1.0, 2.0, size=(6, 4)), rng)


def case_dropout_frozen(seed):
    rng = np.random.default_rng(seed)
    drop = Dropout(0.3, np.random.default_rng(seed + 1))
    x = rng.normal(size=(6, 5))
    drop.forward(x, True)
    drop.frozen = True
    return _layer_error(drop, x, rng)


def _block_pre(block, x):
    h = block.bn.forward(x, True) if block.bn is not None else x
    return h @ block.lin1.W.data.T + block.lin1.b.data


def case_ffn_block(seed):
    rng = np.random.default_rng(seed)
    block = FeedForwardBlock(4, 3, dropout=0.2, rng=rng, dropout_rng=np.random.default_rng(seed + 1))
    block.bn.gamma.data[:] = rng.uniform(0.5, 2.0, 4)
    block.bn.beta.data[:] = rng.normal(size=4)
    block.lin1.b.data[:] = rng.normal(0, 0.1, block.width)
    x = _away_from_kink(rng, (5, 4), lambda x: _block_pre(block, x))
    block.forward(x, True)
    block.drop.frozen = True
    return _layer_error(block, x, rng)


def case_gated(seed, mid_relu=False):
    rng = np.random.default_rng(seed)
    gate = GatedActivation(8, 2, rng, mid_relu=mid_relu)
    gate.down.b.data[:] = rng.normal(0, 0.5, 4)
    gate.up.b.data[:] = rng.normal(0, 0.5, 8)

    def pre(x):
        return x @ gate.down.W.data.T + gate.down.b.data

    x = _away_from_kink(rng, (5, 8), pre) if mid_relu else rng.normal(size=(5, 8))
    return _layer_error(gate, x, rng)


def case_gated_mid_relu(seed):
    return case_gated(seed, mid_relu=True)


def case_bce(seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(0, 3, size=(16, 1))
    y = rng.integers(0, 2, 16).astype(float)
    _, g = bce_with_logits(z, y)
    return rel_error(g, numeric_grad(lambda: bce_with_logits(z, y)[0], z))


def _ic_case(seed, mode):
    rng = np.random.default_rng(seed)
    r = rng.normal(size=8)
    lam = float(rng.uniform(0.1, 1.0))

    def cos_terms(C):
        U = C / np.linalg.norm(C, axis=0)
        G = U.T @ U
        return np.r_[U.T @ (r / np.linalg.norm(r)), G[np.triu_indices(3, 1)]]

    C = _away_from_kink(rng, (8, 3), cos_terms) if mode == "predictive" else rng.normal(size=(8, 3))
    _, g = ic_loss(C, r, lam, mode)
    return rel_error(g, numeric_grad(lambda: ic_loss(C, r, lam, mode)[0], C))


def case_ic_predictive(seed):
    return _ic_case(seed, "predictive")


def case_ic_literal(seed):
    return _ic_case(seed, "literal")


CASES = {
    "linear": case_linear,
    "relu": case_relu,
    "sigmoid": case_sigmoid,
    "batchnorm_train": case_batchnorm_train,
    "dropout_frozen_mask": case_dropout_frozen,
    "ffn_block": case_ffn_block,
    "gated": case_gated,
    "gated_mid_relu": case_gated_mid_relu,
    "bce": case_bce,
    "ic_predictive": case_ic_predictive,
    "ic_literal": case_ic_literal,
}


def worst_error(name: str, n_seeds: int = N_SEEDS) -> float:
    return max(CASES[name](seed) for seed in range(n_seeds))
