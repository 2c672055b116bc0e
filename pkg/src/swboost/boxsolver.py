"""Limited-memory quasi-Newton minimization under elementwise lower bounds.

Each iteration identifies the active set with the projected gradient, takes
an L-BFGS direction on the free variables, and backtracks along the
projected path until the Armijo condition holds. If the quasi-Newton
direction is not a descent direction (or its line search fails) a plain
projected-gradient step is used instead, so accepted iterates always
decrease the objective.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

ARMIJO_C = 1e-4
MAX_BACKTRACKS = 60
CURVATURE_EPS = 1e-10


class SolverError(RuntimeError):
    """The objective produced a non-finite value or gradient."""


@dataclass(frozen=True)
class SolverSettings:
    max_iterations: int = 100
    projected_gradient_tol: float = 1e-5
    objective_decrease_tol: float = 1e-9
    memory_pairs: int = 10

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.projected_gradient_tol <= 0 or self.objective_decrease_tol <= 0:
            raise ValueError("solver tolerances must be positive")
        if self.memory_pairs < 1:
            raise ValueError("memory_pairs must be >= 1")


@dataclass
class SolveReport:
    minimizer: np.ndarray
    objective: float
    iterations: int
    termination: str  # "gradient_tol", "objective_tol" or "max_iter"
    evaluations: int = 0
    projected_gradient: float = np.nan


def projected_gradient_norm(x, g, lower=0.0) -> float:
    return float(np.max(np.abs(x - np.maximum(x - g, lower)), initial=0.0))


def _two_loop(g, pairs, free):
    """Apply the L-BFGS inverse-Hessian estimate to ``g`` on the free coordinates."""
    q = g[free].copy()
    used = []
    for s, y in reversed(pairs):
        sf, yf = s[free], y[free]
        sy = sf @ yf
        if sy <= CURVATURE_EPS * math.sqrt((sf @ sf) * (yf @ yf)):
            continue
        a = (sf @ q) / sy
        q -= a * yf
        used.append((sf, yf, sy, a))
    if used:
        sf, yf, sy, _ = used[0]
        q *= sy / (yf @ yf)
    for sf, yf, sy, a in reversed(used):
        b = (yf @ q) / sy
        q += (a - b) * sf
    return q, bool(used)


def minimize_box(fun: Callable[[np.ndarray], tuple[float, np.ndarray]], x0,
                 settings: SolverSettings | None = None, lower=0.0) -> SolveReport:
    """Minimize a smooth convex ``fun`` (returning value and gradient) subject to ``x >= lower``."""
    settings = settings or SolverSettings()
    lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), np.shape(x0))
    x = np.array(x0, dtype=np.float64)
    if np.any(x < lower):
        raise ValueError("starting point violates the lower bounds")

    evaluations = 0

    def evaluate(point):
        nonlocal evaluations
        evaluations += 1
        val, grad = fun(point)
        val = float(val)
        grad = np.asarray(grad, dtype=np.float64)
        if not np.isfinite(val) or not np.all(np.isfinite(grad)):
            raise SolverError(f"non-finite objective or gradient at evaluation {evaluations}")
        return val, grad

    f, g = evaluate(x)
    pairs: deque = deque(maxlen=settings.memory_pairs)
    termination = "max_iter"
    iterations = 0

    def line_search(d, alpha):
        for _ in range(MAX_BACKTRACKS):
            trial = np.maximum(x + alpha * d, lower)
            step = trial - x
            decrease = g @ step
            if decrease >= 0:
                alpha *= 0.5
                continue
            f_new, g_new = evaluate(trial)
            if f_new <= f + ARMIJO_C * decrease:
                return trial, f_new, g_new
            alpha *= 0.5
        return None

    while iterations < settings.max_iterations:
        if projected_gradient_norm(x, g, lower) <= settings.projected_gradient_tol:
            termination = "gradient_tol"
            break
        free = ~((x <= lower) & (g > 0))
        d = np.zeros_like(x)
        dq, has_curvature = _two_loop(g, pairs, free)
        d[free] = -dq
        alpha0 = 1.0 if has_curvature else min(1.0, 1.0 / max(np.max(np.abs(g[free])), 1e-300))
        result = line_search(d, alpha0) if g @ d < 0 else None
        if result is None:
            d = np.where(free, -g, 0.0)
            result = line_search(d, min(1.0, 1.0 / max(np.max(np.abs(d)), 1e-300)))
        if result is None:
            termination = "objective_tol"
            break
        x_new, f_new, g_new = result
        s, y = x_new - x, g_new - g
        if s @ y > CURVATURE_EPS * math.sqrt((s @ s) * (y @ y)):
            pairs.append((s, y))
        decrease = f - f_new
        x, f, g = x_new, f_new, g_new
        iterations += 1
        if decrease <= settings.objective_decrease_tol:
            termination = "objective_tol"
            break
    else:
        if projected_gradient_norm(x, g, lower) <= settings.projected_gradient_tol:
            termination = "gradient_tol"

    return SolveReport(x, f, iterations, termination, evaluations,
                       projected_gradient_norm(x, g, lower))
