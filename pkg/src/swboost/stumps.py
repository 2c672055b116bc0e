"""Decision stumps and the multi-class edge search.

The weak learner picked each round maximizes the edge
``sum_i v[i, r] * h(x_i)`` jointly over stumps ``h`` and classes ``r``, where
``v`` is derived from the dual weights by :func:`edge_weights`.

Candidates, in tie-break order: feature index, threshold (one below the
minimum of the column, then midpoints between consecutive distinct sorted
values), polarity ``+1`` before ``-1``, class index.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

# Upper bound on float64 elements materialized per feature chunk in the scan.
_CHUNK_ELEMENTS = 2_000_000
# Edges closer than this fraction of sum|v| are ties, resolved by candidate order.
TIE_RTOL = 1e-12


def _as_features(data) -> np.ndarray:
    X = getattr(data, "features", data)
    return np.asarray(X, dtype=np.float64)


@dataclass(frozen=True)
class DecisionStump:
    feature: int
    threshold: float
    polarity: int = 1

    def __post_init__(self):
        if self.polarity not in (1, -1):
            raise ValueError(f"polarity must be +1 or -1, got {self.polarity}")
        if self.feature < 0:
            raise ValueError("feature index must be non-negative")

    def predict(self, X) -> np.ndarray:
        """Outputs in {-1, +1} for each row of ``X`` (or a single vector)."""
        X = np.asarray(X, dtype=np.float64)
        col = X[..., self.feature]
        return np.where(col > self.threshold, self.polarity, -self.polarity).astype(np.float64)

    def flipped(self) -> "DecisionStump":
        return DecisionStump(self.feature, self.threshold, -self.polarity)

    def to_dict(self) -> dict:
        return {"feature": int(self.feature), "threshold": float(self.threshold),
                "polarity": int(self.polarity)}

    @classmethod
    def from_dict(cls, obj: dict) -> "DecisionStump":
        return cls(int(obj["feature"]), float(obj["threshold"]), int(obj["polarity"]))


class StumpSearch(NamedTuple):
    stump: DecisionStump
    r: int  # class in 1..k
    edge: float
    degenerate: bool = False


def edge_weights(u, labels) -> np.ndarray:
    """``v[i, r] = [r == y_i] * sum_l u[i, l] - u[i, r]``; every row sums to 0."""
    u = np.asarray(u, dtype=np.float64)
    labels = np.asarray(labels)
    if u.ndim != 2 or labels.shape != (u.shape[0],):
        raise ValueError(f"shape mismatch: u {u.shape}, labels {labels.shape}")
    v = -u
    rows = np.arange(u.shape[0])
    v[rows, labels - 1] += u.sum(axis=1)
    return v


def edge(stump: DecisionStump, data, v, r: int) -> float:
    X = _as_features(data)
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != X.shape[0] or not 1 <= r <= v.shape[1]:
        raise ValueError("shape mismatch between data, edge weights and class index")
    return float(v[:, r - 1] @ stump.predict(X))


def stump_outputs(stumps: Sequence[DecisionStump], X) -> np.ndarray:
    """Matrix ``H`` of shape (m, n) with ``H[i, j] = h_j(x_i)``."""
    X = _as_features(X)
    if not stumps:
        return np.zeros((X.shape[0], 0))
    return np.column_stack([s.predict(X) for s in stumps])


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("SWBOOST_THREADS", "1")))
    except ValueError:
        return 1


class StumpSearcher:
    """Exhaustive sort-and-scan search over every stump on a fixed matrix.

    Column sorting is done once here, so each :meth:`search` costs
    ``O(d m k)``: per-class prefix sums of ``v`` in sorted order give the
    edge of every threshold for all classes at once.
    """

    def __init__(self, data, threads: int | None = None):
        X = _as_features(data)
        m, d = X.shape
        self.m, self.d = m, d
        self.threads = threads or _thread_count()
        self.order = np.argsort(X, axis=0, kind="stable").T  # (d, m)
        xs = np.take_along_axis(X.T, self.order, axis=1)
        valid = np.ones((d, m), dtype=bool)
        valid[:, 1:] = xs[:, 1:] > xs[:, :-1]
        lo, hi = xs[:, :-1], xs[:, 1:]
        mid = lo + (hi - lo) / 2.0
        mid = np.where(mid >= hi, lo, mid)
        thresholds = np.empty((d, m))
        thresholds[:, 0] = xs[:, 0] - np.maximum(1.0, np.abs(xs[:, 0]))
        thresholds[:, 1:] = mid
        self.valid = valid
        self.thresholds = thresholds

    def _scan(self, v: np.ndarray, total: np.ndarray, features: slice) -> np.ndarray:
        vs = v[self.order[features]]  # (f, m, k)
        below = np.zeros_like(vs)
        np.cumsum(vs[:, :-1, :], axis=1, out=below[:, 1:, :])
        # Shared column totals make the constant stump tie exactly across features.
        e = total - 2.0 * below
        cand = np.stack((e, -e), axis=2)  # (f, m, 2, k)
        cand[~self.valid[features]] = -np.inf
        return cand

    def search(self, v) -> StumpSearch:
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != self.m:
            raise ValueError(f"edge weights must have shape ({self.m}, k), got {v.shape}")
        k = v.shape[1]
        total = v.sum(axis=0)
        per_feature = self.m * 2 * k * 3
        step = max(1, min(self.d, _CHUNK_ELEMENTS // per_feature))
        chunks = [slice(a, min(a + step, self.d)) for a in range(0, self.d, step)]
        if self.threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                results = list(pool.map(lambda c: self._scan(v, total, c), chunks))
        else:
            results = [self._scan(v, total, c) for c in chunks]
        tol = TIE_RTOL * np.abs(v).sum()
        top = max(float(c.max()) for c in results)
        # First candidate in (feature, threshold, polarity, class) order within tol of the max.
        for chunk, cand in zip(chunks, results):
            hits = np.flatnonzero(cand.reshape(-1) >= top - tol)
            if hits.size:
                flat = int(hits[0])
                break
        f_local, pos, pol, r = np.unravel_index(flat, cand.shape)
        f = chunk.start + int(f_local)
        best = float(cand.reshape(-1)[flat])
        stump = DecisionStump(f, float(self.thresholds[f, pos]), 1 if pol == 0 else -1)
        return StumpSearch(stump, int(r) + 1, best, degenerate=top == 0.0)


class PoolSearcher:
    """Edge search restricted to a fixed, finite list of stumps (no polarity flips)."""

    def __init__(self, data, stumps: Sequence[DecisionStump]):
        if not stumps:
            raise ValueError("stump pool must not be empty")
        self.stumps = list(stumps)
        self.H = stump_outputs(self.stumps, data)
        self.m = self.H.shape[0]

    def edges(self, v) -> np.ndarray:
        """Edge of every (pool stump, class) pair, shape (pool, k)."""
        return self.H.T @ np.asarray(v, dtype=np.float64)

    def search(self, v) -> StumpSearch:
        e = self.edges(v)
        tol = TIE_RTOL * np.abs(v).sum()
        j, r = np.unravel_index(int(np.flatnonzero(e.reshape(-1) >= e.max() - tol)[0]), e.shape)
        val = float(e[j, r])
        return StumpSearch(self.stumps[j], int(r) + 1, val, degenerate=val == 0.0)


def best_stump(data, v) -> StumpSearch:
    """Stump, class (1-based) and edge maximizing the multi-class edge."""
    return StumpSearcher(data).search(v)
