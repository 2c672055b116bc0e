"""Experiment drivers behind the CLI: parameter sweeps, solve-time benchmark, coefficient paths."""

from __future__ import annotations

import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .booster import TrainConfig, train
from .boxsolver import minimize_box
from .dataio import Dataset, SplitSpec, stratified_split
from .oracles import PathTrace, epsilon_path, full_objective, l1_constrained
from .stumps import DecisionStump, stump_outputs

# Largest t * k for which the fully-corrective benchmark still runs.
FC_VARIABLE_CAP = 5000


def gaussian_classes(k: int, per_class: int, d: int, seed: int = 0,
                     separation: float = 1.0, label_noise: float = 0.0) -> Dataset:
    """Synthetic stand-in for small UCI tables: one Gaussian blob per class.

    ``label_noise`` is the fraction of samples whose label is redrawn
    uniformly, which keeps the Bayes error away from zero.
    """
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(1, k + 1), per_class)
    centers = rng.normal(scale=separation, size=(k, d))
    X = centers[labels - 1] + rng.normal(size=(len(labels), d))
    flip = rng.random(len(labels)) < label_noise
    labels = labels.copy()
    labels[flip] = rng.integers(1, k + 1, size=int(flip.sum()))
    return Dataset(X, labels, k)


GLASS_CLASS_COUNTS = (70, 76, 17, 13, 9, 29)


def glass_like(seed: int = 0, separation: float = 0.8) -> Dataset:
    """Six unbalanced classes in 9 dimensions with the class sizes of the UCI glass table.

    At the default separation stage-wise boosting makes roughly 25-30% test
    errors, about the difficulty of the real table.
    """
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(1, 7), GLASS_CLASS_COUNTS)
    centers = rng.normal(scale=separation, size=(6, 9))
    X = centers[labels - 1] + rng.normal(size=(len(labels), 9))
    return Dataset(X, labels, 6)


def toy_instance(seed: int = 0, m: int = 20, k: int = 3, d: int = 4,
                 separation: float = 1.5) -> Dataset:
    """Tiny round-robin-labeled problem for path and duality checks."""
    rng = np.random.default_rng(seed)
    labels = np.arange(m) % k + 1
    centers = rng.normal(scale=separation, size=(k, d))
    X = centers[labels - 1] + rng.normal(size=(m, d))
    return Dataset(X, labels, k)


def stump_pool(data: Dataset, size: int, loss: str = "exp") -> list[DecisionStump]:
    """First ``size`` distinct stumps picked by stage-wise boosting on ``data``.

    When boosting keeps reusing fewer stumps, the pool is topped up with
    median-threshold stumps on each feature, then the constant stump.
    """
    model, _ = train(data, TrainConfig(loss=loss, eta=0.5, max_rounds=50 * size))
    pool: list[DecisionStump] = []
    for stump in model.stumps:
        if stump not in pool:
            pool.append(stump)
    X = data.features
    fillers = []
    for q in (0.5, 0.25, 0.75):
        for f in range(data.d):
            col = np.sort(X[:, f])
            j = min(max(int(q * len(col)), 1), len(col) - 1)
            if col[j] > col[j - 1]:
                fillers.append(DecisionStump(f, float(col[j - 1] + (col[j] - col[j - 1]) / 2.0), 1))
    fillers.append(DecisionStump(0, float(X[:, 0].min() - max(1.0, abs(X[:, 0].min()))), 1))
    for stump in fillers:
        if len(pool) >= size:
            break
        if stump not in pool and stump.flipped() not in pool:
            pool.append(stump)
    return pool[:size]


# -- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    param: float
    repeat: int
    seed: int
    test_error: float


def _one_run(args):
    data, cfg, split, param_name, value, repeat, seed = args
    cfg = replace(cfg, **{param_name: value, "seed": seed})
    train_set, test_set = stratified_split(data, replace(split, seed=seed))
    model, _ = train(train_set, cfg)
    return SweepRow(value, repeat, seed, model.error(test_set))


def run_sweep(data: Dataset, param_name: str, values: Sequence[float], repeats: int,
              cfg: TrainConfig, split: SplitSpec, seed_base: int = 0,
              workers: int | None = None) -> list[SweepRow]:
    """Test error for every (value, repeat); repeat ``r`` uses seed ``seed_base + r`` for all values."""
    if param_name not in ("nu", "eta", "kappa"):
        raise ValueError(f"cannot sweep {param_name!r}")
    if repeats < 1 or not values:
        raise ValueError("need at least one repeat and one sweep value")
    jobs = [(data, cfg, split, param_name, float(v), r, seed_base + r)
            for v in values for r in range(repeats)]
    workers = workers or int(os.environ.get("SWBOOST_THREADS", "1") or 1)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_one_run, jobs))
    else:
        rows = [_one_run(j) for j in jobs]
    order = {float(v): n for n, v in enumerate(values)}
    return sorted(rows, key=lambda r: (order[r.param], r.repeat))


def summarize(rows: Sequence[SweepRow]) -> dict:
    """``{param: (mean, sample std)}``; std is NaN for a single repeat."""
    groups: dict[float, list[float]] = {}
    for row in rows:
        groups.setdefault(row.param, []).append(row.test_error)
    return {p: (statistics.fmean(errs), statistics.stdev(errs) if len(errs) > 1 else math.nan)
            for p, errs in groups.items()}


# -- timing benchmark -------------------------------------------------------

@dataclass(frozen=True)
class BenchRow:
    round: int
    stagewise_ms: float
    fullycorrective_ms: float | None


def run_bench(data: Dataset, cfg: TrainConfig, rounds: int,
              fc_cap: int = FC_VARIABLE_CAP) -> list[BenchRow]:
    """Per-round coefficient-solve wall time, stage-wise vs fully-corrective.

    At round ``t`` the fully-corrective solver fits all ``t * k``
    coefficients of the first ``t`` stumps chosen by the stage-wise run, from
    zero, under the same solver settings. Rounds with ``t * k > fc_cap`` get
    ``None``.
    """
    cfg = replace(cfg, max_rounds=rounds)
    model, trace = train(data, cfg)
    H = stump_outputs(model.stumps, data.features)
    k = data.k
    rows = []
    for rec in trace.records:
        t = rec.round
        fc_ms = None
        if t * k <= fc_cap:
            Ht = H[:, :t]
            shape = (t, k)

            def fun(x):
                value, grad = full_objective(x.reshape(shape), Ht, data.labels, cfg.nu, cfg.loss)
                return value, grad.ravel()

            start = time.perf_counter()
            minimize_box(fun, np.zeros(t * k), cfg.solver)
            fc_ms = (time.perf_counter() - start) * 1e3
        rows.append(BenchRow(t, rec.solve_ms, fc_ms))
    return rows


# -- coefficient paths ------------------------------------------------------

@dataclass(frozen=True)
class PathComparison:
    gamma: float
    step: int
    coefficients: np.ndarray
    max_gap: float


def compare_path(data: Dataset, trace: PathTrace, kind: str, grid: int) -> list[PathComparison]:
    """l1-constrained solutions at ``grid`` evenly spaced norms along the path.

    Each oracle solve is warm-started from the previous grid point.
    """
    steps = len(trace.l1_norms)
    picks = np.unique(np.linspace(steps / grid, steps, grid).round().astype(int))
    out = []
    W = None
    for s in picks:
        gamma = float(trace.l1_norms[s - 1])
        W = l1_constrained(data, trace.pool, gamma, kind, w0=W)
        gap = float(np.max(np.abs(W - trace.coefficients[s - 1])))
        out.append(PathComparison(gamma, int(s), W, gap))
    return out

