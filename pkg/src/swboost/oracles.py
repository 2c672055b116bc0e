"""Reference solvers used to check the stage-wise booster.

None of these share code paths with the booster's stump scan or its
per-round objectives: the binary AdaBoost oracle enumerates weighted errors
directly, the fully-corrective solver re-optimizes every coefficient, and the
l1-constrained solver uses accelerated projected gradient.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .booster import BoostModel, TrainConfig
from .boxsolver import SolverSettings, SolveReport, minimize_box
from .dataio import Dataset
from .losses import EXP, dual_update, loss_kind, margins_from_scores
from .stumps import DecisionStump, edge_weights, stump_outputs

MIN_WEIGHTED_ERROR = 1e-12


class OracleError(RuntimeError):
    pass


def _candidate_thresholds(col: np.ndarray) -> np.ndarray:
    vals = np.unique(col)
    lo, hi = vals[:-1], vals[1:]
    mid = lo + (hi - lo) / 2.0
    mid = np.where(mid >= hi, lo, mid)
    return np.concatenate(([vals[0] - max(1.0, abs(vals[0]))], mid))


def adaboost_binary(data: Dataset, rounds: int) -> BoostModel:
    """Discrete AdaBoost with stumps and the closed-form coefficient.

    Class 1 is the positive class (``z = +1``), class 2 the negative one.
    Each coefficient ``alpha`` is stored as the W row ``(alpha, 0)`` so that
    ``W[:, 0] - W[:, 1]`` recovers the AdaBoost weights.
    """
    if data.k != 2:
        raise ValueError("adaboost_binary needs exactly two classes")
    X = data.features
    z = np.where(data.labels == 1, 1.0, -1.0)
    m = data.m
    weights = np.full(m, 1.0 / m)
    thresholds = [_candidate_thresholds(X[:, f]) for f in range(data.d)]
    stumps, alphas = [], []
    for _ in range(rounds):
        tol = 1e-12 * weights.sum()
        best = None
        for f, thr in enumerate(thresholds):
            outputs = np.where(X[:, f][:, None] > thr[None, :], 1.0, -1.0)
            err_pos = weights @ (outputs != z[:, None])
            err_neg = weights @ (-outputs != z[:, None])
            for j in range(len(thr)):
                for polarity, err in ((1, err_pos[j]), (-1, err_neg[j])):
                    if best is None or err < best[0] - tol:
                        best = (err, f, thr[j], polarity)
        err, f, thr, polarity = best
        eps = err / weights.sum()
        if eps >= 0.5:
            break
        eps = max(eps, MIN_WEIGHTED_ERROR)
        alpha = 0.5 * math.log((1.0 - eps) / eps)
        stump = DecisionStump(f, float(thr), polarity)
        weights = weights * np.exp(-z * stump.predict(X) * alpha)
        weights /= weights.sum()
        stumps.append(stump)
        alphas.append(alpha)
    W = np.column_stack([alphas, np.zeros(len(alphas))]) if alphas else np.zeros((0, 2))
    return BoostModel(tuple(stumps), W, 2, EXP, d=data.d, classes=data.classes)


def full_objective(W, H, labels, nu: float, kind: str):
    """Full regularized primal over every coefficient, with gradient (same shape as W)."""
    kind = loss_kind(kind)
    rho = margins_from_scores(H @ W, labels)
    if kind == EXP:
        value = logsumexp(-rho)
        p = np.exp(-rho - value)
    else:
        value = np.logaddexp(0.0, -rho).sum()
        p = expit(-rho)
    grad = nu - H.T @ edge_weights(p, labels)
    return float(value + nu * W.sum()), grad


def fully_corrective(data: Dataset, stumps: Sequence[DecisionStump], cfg: TrainConfig,
                     settings: SolverSettings | None = None, w0=None,
                     report: bool = False):
    """Minimize the full primal over all ``len(stumps) * k`` coefficients at once.

    Returns W, or ``(W, SolveReport)`` when ``report`` is true.
    """
    settings = settings or cfg.solver
    H = stump_outputs(stumps, data.features)
    shape = (len(stumps), data.k)
    if w0 is None:
        w0 = np.zeros(shape)
    labels = data.labels

    def fun(x):
        value, grad = full_objective(x.reshape(shape), H, labels, cfg.nu, cfg.loss)
        return value, grad.ravel()

    rep: SolveReport = minimize_box(fun, np.asarray(w0, dtype=np.float64).ravel(), settings)
    W = rep.minimizer.reshape(shape)
    return (W, rep) if report else W


def project_nonneg_l1_ball(x, gamma: float) -> np.ndarray:
    """Euclidean projection onto ``{w >= 0, sum(w) <= gamma}``."""
    y = np.maximum(np.asarray(x, dtype=np.float64), 0.0)
    if gamma <= 0:
        return np.zeros_like(y)
    if y.sum() <= gamma:
        return y
    flat = y.ravel()
    srt = np.sort(flat)[::-1]
    css = np.cumsum(srt) - gamma
    idx = np.arange(1, len(srt) + 1)
    rho = np.nonzero(srt - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(y - theta, 0.0)


def _l1_loss(W, H, labels, kind):
    # Unregularized loss; log-sum-exp for the exponential case has the same minimizers.
    return full_objective(W, H, labels, 0.0, kind)


def l1_constrained(data: Dataset, stump_pool: Sequence[DecisionStump], gamma: float,
                   kind: str = EXP, w0=None, max_iter: int = 50_000,
                   tol: float = 1e-9) -> np.ndarray:
    """Minimize the loss over ``W >= 0`` with ``||W||_1 <= gamma``.

    FISTA with backtracking and adaptive restart; converged when the scaled
    gradient-mapping norm falls below ``tol``.
    """
    H = stump_outputs(stump_pool, data.features)
    shape = (len(stump_pool), data.k)
    if gamma <= 0:
        return np.zeros(shape)
    labels = data.labels
    x = project_nonneg_l1_ball(np.zeros(shape) if w0 is None else w0, gamma)
    yk, t = x.copy(), 1.0
    lip = 1.0
    f_x = _l1_loss(x, H, labels, kind)[0]
    for _ in range(max_iter):
        f_y, g_y = _l1_loss(yk, H, labels, kind)
        slack = 1e-13 * max(1.0, abs(f_y))  # rounding noise in f
        while True:
            x_new = project_nonneg_l1_ball(yk - g_y / lip, gamma)
            diff = x_new - yk
            f_new = _l1_loss(x_new, H, labels, kind)[0]
            if f_new <= f_y + np.sum(g_y * diff) + 0.5 * lip * np.sum(diff * diff) + slack:
                break
            lip *= 2.0
        mapping = lip * np.max(np.abs(diff))
        if f_new > f_x + slack and t > 1.0:
            # Adaptive restart: drop momentum and retry from the last iterate.
            yk, t = x.copy(), 1.0
            continue
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        yk = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, f_x, t = x_new, f_new, t_new
        lip *= 0.9
        if mapping <= tol:
            return x
    raise OracleError(f"l1_constrained did not converge in {max_iter} iterations (gamma={gamma})")


@dataclass
class PathTrace:
    """Coefficient snapshots of epsilon-step boosting over a fixed stump pool."""

    pool: list
    k: int
    l1_norms: np.ndarray  # (steps,)
    coefficients: np.ndarray  # (steps, pool, k)
    selections: list  # (pool index, class 1..k) per step

    def to_csv(self, path) -> None:
        n = self.coefficients.shape[1] * self.k
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "l1_norm"] + [f"w_{j}" for j in range(1, n + 1)])
            for s, (norm, W) in enumerate(zip(self.l1_norms, self.coefficients), start=1):
                writer.writerow([s, repr(float(norm))] + [repr(float(w)) for w in W.ravel()])


def epsilon_path(data: Dataset, stump_pool: Sequence[DecisionStump], step: float = 0.01,
                 steps: int = 1000, kind: str = EXP) -> PathTrace:
    """Forward stage-wise path: each step adds ``step`` to the single most violated (stump, class)."""
    kind = loss_kind(kind)
    H = stump_outputs(stump_pool, data.features)
    labels = data.labels
    W = np.zeros((len(stump_pool), data.k))
    scores = np.zeros((data.m, data.k))
    norms = np.empty(steps)
    snaps = np.empty((steps,) + W.shape)
    picks = []
    for s in range(steps):
        u = dual_update(margins_from_scores(scores, labels), kind)
        e = H.T @ edge_weights(u, labels)
        j, r = np.unravel_index(int(np.argmax(e)), e.shape)
        W[j, r] += step
        scores[:, r] += step * H[:, j]
        norms[s] = (s + 1) * step
        snaps[s] = W
        picks.append((int(j), int(r) + 1))
    return PathTrace(list(stump_pool), data.k, norms, snaps, picks)
