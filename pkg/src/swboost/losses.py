"""Margins, primal objectives and dual weights for the exponential and logistic losses.

Every sum over classes runs over all ``r = 1..k`` including the true class,
whose margin is identically zero.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, logsumexp, xlogy

from .stumps import edge_weights, stump_outputs

EXP = "exp"
LOG = "log"
_ALIASES = {"exp": EXP, "exponential": EXP, "log": LOG, "logistic": LOG}


def loss_kind(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except (KeyError, AttributeError):
        raise ValueError(f"unknown loss {name!r}; expected 'exp' or 'log'") from None


def margins_from_scores(scores, labels) -> np.ndarray:
    """``rho[i, r] = scores[i, y_i] - scores[i, r]``."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 2 or labels.shape != (scores.shape[0],):
        raise ValueError(f"shape mismatch: scores {scores.shape}, labels {labels.shape}")
    true = scores[np.arange(scores.shape[0]), labels - 1]
    return true[:, None] - scores


def margins(model, data) -> np.ndarray:
    """Margin table of ``model`` (stumps + W) on ``data``; zeros when the model is empty."""
    W = np.asarray(model.W, dtype=np.float64)
    if W.shape != (len(model.stumps), model.k):
        raise ValueError(f"W has shape {W.shape}, expected ({len(model.stumps)}, {model.k})")
    if model.k != data.k:
        raise ValueError(f"model has {model.k} classes, data has {data.k}")
    H = stump_outputs(model.stumps, data.features)
    return margins_from_scores(H @ W, data.labels)


def primal_objective(rho, W, nu: float, kind: str) -> float:
    """Log-sum-exp (exp) or summed logistic (log) loss of the margins plus ``nu * ||W||_1``."""
    kind = loss_kind(kind)
    W = np.asarray(W, dtype=np.float64)
    if np.any(W < 0):
        raise ValueError("coefficient matrix must be non-negative")
    if nu < 0:
        raise ValueError("nu must be non-negative")
    rho = np.asarray(rho, dtype=np.float64)
    reg = nu * W.sum()
    if kind == EXP:
        return float(logsumexp(-rho)) + reg
    return float(np.logaddexp(0.0, -rho).sum()) + reg


def dual_update(rho, kind: str) -> np.ndarray:
    """Dual weights from margins via the KKT conditions.

    Exponential: softmax of ``-rho`` over all (i, r) entries jointly.
    Logistic: elementwise sigmoid of ``-rho``.
    """
    kind = loss_kind(kind)
    rho = np.asarray(rho, dtype=np.float64)
    if kind == EXP:
        a = -rho
        u = np.exp(a - a.max())
        return u / u.sum()
    return expit(-rho)


def dual_objective(u, kind: str) -> float:
    """Negative-entropy dual objective (minimization form), with 0 log 0 = 0.

    The dual *value* bounding the primal from below is the negation of this,
    so the duality gap is ``primal_objective + dual_objective``.
    """
    kind = loss_kind(kind)
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0):
        raise ValueError("dual weights must be non-negative")
    if kind == EXP:
        if abs(u.sum() - 1.0) > 1e-9:
            raise ValueError(f"exponential dual weights must sum to 1, got {u.sum():.12g}")
        return float(xlogy(u, u).sum())
    if np.any(u > 1):
        raise ValueError("logistic dual weights must lie in [0, 1]")
    return float((xlogy(u, u) + xlogy(1.0 - u, 1.0 - u)).sum())


def duality_gap(rho, W, u, nu: float, kind: str) -> float:
    return primal_objective(rho, W, nu, kind) + dual_objective(u, kind)


def dual_infeasibility(u, data, searcher, nu: float) -> float:
    """Violation ``max_{h, r} sum_i v[i, r] h(x_i) - nu`` over a stump family.

    ``searcher`` is a :class:`~swboost.stumps.StumpSearcher` (every stump on
    ``data``) or a :class:`~swboost.stumps.PoolSearcher`. A value ``<= 0``
    means ``u`` is dual feasible for that family.
    """
    v = edge_weights(u, data.labels)
    return searcher.search(v).edge - nu
