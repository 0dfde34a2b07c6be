"""Dense layers with hand-written forward and backward passes.

Activations are plain ``(n, features)`` float64 arrays.  Trainable tensors
are :class:`Param` objects pairing the values with a same-shape gradient
buffer.  Each layer caches what its backward pass needs during ``forward``,
so a layer instance serves one forward/backward pair at a time.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError


class Param:
    """A trainable tensor and its accumulated gradient."""

    __slots__ = ("name", "data", "grad")

    def __init__(self, data: np.ndarray, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data)
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Param({self.name!r}, shape={self.data.shape})"


def kaiming_uniform(rng, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


def xavier_uniform(rng, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


def _as_2d(x: np.ndarray, cols: int, who: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cols:
        raise ShapeError(f"{who}: expected input of shape (n, {cols}), got {x.shape}")
    return x


class Layer:
    def params(self) -> list[Param]:
        return []

    def buffers(self) -> dict[str, np.ndarray]:
        return {}

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Linear(Layer):
    """Affine map ``x @ W.T + b`` with ``W`` of shape (out, in)."""

    def __init__(self, in_dim: int, out_dim: int, rng=None, init: str = "kaiming"):
        self.in_dim, self.out_dim = in_dim, out_dim
        if init == "zeros" or rng is None:
            w = np.zeros((out_dim, in_dim))
        elif init == "kaiming":
            w = kaiming_uniform(rng, in_dim, out_dim)
        elif init == "xavier":
            w = xavier_uniform(rng, in_dim, out_dim)
        else:
            raise ConfigError(f"unknown init {init!r}")
        self.W = Param(w, "W")
        self.b = Param(np.zeros(out_dim), "b")
        self._x = None

    def params(self):
        return [self.W, self.b]

    def forward(self, x, train=False):
        x = _as_2d(x, self.in_dim, f"Linear({self.in_dim}->{self.out_dim})")
        self._x = x
        return x @ self.W.data.T + self.b.data

    def backward(self, grad):
        grad = _as_2d(grad, self.out_dim, f"Linear({self.in_dim}->{self.out_dim}).backward")
        if grad.shape[0] != self._x.shape[0]:
            raise ShapeError(f"upstream grad has {grad.shape[0]} rows, input had {self._x.shape[0]}")
        self.W.grad += grad.T @ self._x
        self.b.grad += grad.sum(axis=0)
        return grad @ self.W.data


class ReLU(Layer):
    def forward(self, x, train=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad):
        return np.where(self._mask, grad, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


class Sigmoid(Layer):
    def forward(self, x, train=False):
        self._y = sigmoid(x)
        return self._y

    def backward(self, grad):
        return grad * self._y * (1.0 - self._y)


class BatchNorm(Layer):
    """Per-feature batch normalization.

    Training mode normalizes with the batch mean and biased variance and
    updates the running estimates; inference mode uses the running
    estimates only.
    """

    def __init__(self, dim: int, eps: float = 1e-5, momentum: float = 0.1):
        self.dim = dim
        self.eps = eps
        self.momentum = momentum
        self.gamma = Param(np.ones(dim), "gamma")
        self.beta = Param(np.zeros(dim), "beta")
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)

    def params(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x, train=False):
        x = _as_2d(x, self.dim, f"BatchNorm({self.dim})")
        self._train = train
        if train:
            n = x.shape[0]
            if n < 2:
                raise ShapeError(f"BatchNorm needs at least 2 rows in training mode, got {n}")
            mu = x.mean(axis=0)
            centered = x - mu
            var = np.mean(centered * centered, axis=0)
            self.running_mean *= 1.0 - self.momentum
            self.running_mean += self.momentum * mu
            self.running_var *= 1.0 - self.momentum
            self.running_var += self.momentum * var
        else:
            centered = x - self.running_mean
            var = self.running_var
        self._inv_std = 1.0 / np.sqrt(var + self.eps)
        self.xhat = centered * self._inv_std
        return self.gamma.data * self.xhat + self.beta.data

    def backward(self, grad):
        grad = _as_2d(grad, self.dim, f"BatchNorm({self.dim}).backward")
        self.gamma.grad += np.sum(grad * self.xhat, axis=0)
        self.beta.grad += grad.sum(axis=0)
        g = grad * self.gamma.data
        if not self._train:
            return g * self._inv_std
        n = grad.shape[0]
        # mean and variance both depend on every row of the batch
        return (self._inv_std / n) * (n * g - g.sum(axis=0) - self.xhat * np.sum(g * self.xhat, axis=0))


class Dropout(Layer):
    """Inverted dropout: survivors are scaled by ``1 / (1 - p)`` during training."""

    def __init__(self, p: float, rng=None):
        if not 0.0 <= p < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {p}")
        self.p = p
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.frozen = False
        self.mask = None

    def forward(self, x, train=False):
        if not train or self.p == 0.0:
            self.mask = None
            return x
        if not (self.frozen and self.mask is not None and self.mask.shape == x.shape):
            keep = self.rng.random(x.shape) >= self.p
            self.mask = keep / (1.0 - self.p)
        return x * self.mask

    def backward(self, grad):
        return grad if self.mask is None else grad * self.mask


class FeedForwardBlock(Layer):
    """``x + lin2(dropout(relu(lin1(bn(x)))))`` with expansion width ``m * d``.

    ``batchnorm=False, residual=False, dropout=0`` gives the plain stacked
    block.  When ``d_out != d`` the shortcut becomes a learned projection.
    """

    def __init__(
        self,
        d: int,
        m: int,
        dropout: float = 0.0,
        rng=None,
        batchnorm: bool = True,
        residual: bool = True,
        d_out: int | None = None,
        dropout_rng=None,
    ):
        self.d = d
        self.d_out = d if d_out is None else d_out
        self.width = m * d
        rng = rng if rng is not None else np.random.default_rng(0)
        self.bn = BatchNorm(d) if batchnorm else None
        self.lin1 = Linear(d, self.width, rng, "kaiming")
        self.act = ReLU()
        self.drop = Dropout(dropout, dropout_rng)
        self.lin2 = Linear(self.width, self.d_out, rng, "kaiming")
        self.residual = residual
        self.proj = Linear(d, self.d_out, rng, "xavier") if residual and self.d_out != d else None
        self.features = None

    def children(self) -> dict[str, Layer]:
        out = {}
        if self.bn is not None:
            out["bn"] = self.bn
        out["lin1"] = self.lin1
        out["lin2"] = self.lin2
        if self.proj is not None:
            out["proj"] = self.proj
        return out

    def params(self):
        return [p for layer in self.children().values() for p in layer.params()]

    def forward(self, x, train=False):
        x = _as_2d(x, self.d, f"FeedForwardBlock({self.d})")
        h = self.bn.forward(x, train) if self.bn is not None else x
        self.features = self.act.forward(self.lin1.forward(h, train))
        f = self.lin2.forward(self.drop.forward(self.features, train), train)
        if not self.residual:
            return f
        return (self.proj.forward(x, train) if self.proj is not None else x) + f

    def backward(self, grad, feature_grad=None):
        g = self.drop.backward(self.lin2.backward(grad))
        if feature_grad is not None:
            g = g + feature_grad
        g = self.lin1.backward(self.act.backward(g))
        if self.bn is not None:
            g = self.bn.backward(g)
        if self.residual:
            g = g + (self.proj.backward(grad) if self.proj is not None else grad)
        return g


class GatedActivation(Layer):
    """Bottleneck gate ``x * sigmoid(up(down(x)))`` with ``d -> d/k -> d``."""

    def __init__(self, d: int, k: int, rng=None, mid_relu: bool = False):
        if k < 1 or d % k != 0:
            raise ConfigError(f"gate divisor k={k} must divide d={d}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.d, self.k = d, k
        self.down = Linear(d, d // k, rng, "xavier")
        self.up = Linear(d // k, d, rng, "xavier")
        self.mid = ReLU() if mid_relu else None
        self.sig = Sigmoid()

    def children(self) -> dict[str, Layer]:
        return {"down": self.down, "up": self.up}

    def params(self):
        return self.down.params() + self.up.params()

    def forward(self, x, train=False):
        x = _as_2d(x, self.d, f"GatedActivation({self.d})")
        self._x = x
        h = self.down.forward(x, train)
        if self.mid is not None:
            h = self.mid.forward(h, train)
        self.gate = self.sig.forward(self.up.forward(h, train))
        return x * self.gate

    def backward(self, grad):
        g_pre = self.sig.backward(grad * self._x)
        g_h = self.up.backward(g_pre)
        if self.mid is not None:
            g_h = self.mid.backward(g_h)
        return grad * self.gate + self.down.backward(g_h)
