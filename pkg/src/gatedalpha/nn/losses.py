"""Loss functions returning ``(value, gradient)`` pairs."""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import ShapeError


def bce_with_logits(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy on raw logits, stable for large ``|z|``.

    Returns the loss and its gradient with respect to ``logits``.
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).reshape(z.shape)
    n = z.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(z)
    # softplus(z) - y*z == max(z, 0) - y*z + log1p(exp(-|z|))
    per = np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))
    e = np.exp(-np.abs(z))
    p = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(per.mean()), (p - y) / n


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"cosine_similarity: shapes {a.shape} and {b.shape} differ")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def ic_loss(features, future_excess, lam: float = 1.0, mode: str = "predictive") -> tuple[float, np.ndarray]:
    """Cross-sectional factor-quality loss for one date.

    ``features`` is (stocks, factors); each column is a candidate factor and
    is compared with ``future_excess`` (one value per stock) by cosine
    similarity.

    ``predictive``: ``-sum_i |Sc(c_i, ret)| + lam * sum_{i<j} |Sc(c_i, c_j)|``
    rewards factors aligned with future returns and penalizes redundancy.

    ``literal``: ``sum_i Sc(c_i, ret) - lam * sum_{i != j} Sc(c_i, c_j)``.

    Zero-norm columns contribute nothing (their cosine is undefined).
    """
    C = np.asarray(features, dtype=np.float64)
    r = np.asarray(future_excess, dtype=np.float64).ravel()
    if C.ndim != 2 or C.shape[0] != r.shape[0]:
        raise ShapeError(f"ic_loss: features {C.shape} do not match returns {r.shape}")
    if C.shape[0] < 2:
        raise ShapeError("ic_loss needs at least 2 stocks")
    if mode not in ("predictive", "literal"):
        raise ValueError(f"unknown ic_loss mode {mode!r}")

    norms = np.linalg.norm(C, axis=0)
    live = norms > 0
    if not live.all():
        warnings.warn(f"ic_loss: {int((~live).sum())} zero-norm factor columns ignored", RuntimeWarning, stacklevel=2)
    rnorm = np.linalg.norm(r)
    if rnorm == 0:
        warnings.warn("ic_loss: zero return vector; return-alignment term is 0", RuntimeWarning, stacklevel=2)
        u_r = np.zeros_like(r)
    else:
        u_r = r / rnorm
    safe = np.where(live, norms, 1.0)
    U = np.where(live, C / safe, 0.0)

    s = U.T @ u_r
    G = U.T @ U
    np.fill_diagonal(G, 0.0)
    if mode == "literal":
        loss = s.sum() - lam * G.sum()
        dU = u_r[:, None] - 2.0 * lam * (U.sum(axis=1, keepdims=True) - U)
    else:
        loss = -np.abs(s).sum() + lam * np.abs(G).sum() / 2.0
        dU = -u_r[:, None] * np.sign(s)[None, :] + lam * (U @ np.sign(G))
    # back through column normalization U = C / |C|
    dC = (dU - U * np.sum(U * dU, axis=0)) / safe
    dC[:, ~live] = 0.0
    return float(loss), dC
