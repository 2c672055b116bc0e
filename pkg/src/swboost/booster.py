"""Stage-wise multi-class boosting with decision stumps.

Each round picks the stump/class pair with the largest edge under the current
dual weights, stops if that edge is within ``nu + stop_slack``, and otherwise
solves for the new stump's ``k`` non-negative coefficients with every earlier
row of ``W`` frozen. Dual weights are then recomputed from the full margins.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .boxsolver import SolverSettings, minimize_box
from .dataio import Dataset
from .losses import EXP, LOG, dual_update, loss_kind, margins_from_scores
from .stumps import DecisionStump, PoolSearcher, StumpSearcher, edge_weights

MODEL_FORMAT = "swboost-model"
MODEL_VERSION = 1
TRACE_HEADER = ["round", "feature", "threshold", "polarity", "r_star", "edge",
                "objective", "train_err", "test_err", "solve_ms"]
# Clamp for the weighted error in the closed-form binary coefficient.
MIN_WEIGHTED_ERROR = 1e-12


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    loss: str = EXP
    nu: float = 1e-9
    eta: float = 0.5
    kappa: float | None = None
    max_rounds: int = 500
    stop_slack: float = 1e-7
    solver: SolverSettings = field(default_factory=SolverSettings)
    seed: int = 0
    # "solve": quasi-Newton on the k coefficients; "closed_form": AdaBoost's
    # alpha, valid only for k = 2 with the exponential loss.
    coef_rule: str = "solve"

    def __post_init__(self):
        object.__setattr__(self, "loss", loss_kind(self.loss))
        if self.nu < 0:
            raise ValueError("nu must be non-negative")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if self.kappa is not None and self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.stop_slack <= 0:
            raise ValueError("stop_slack must be positive")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be non-negative")
        if self.coef_rule not in ("solve", "closed_form"):
            raise ValueError(f"unknown coef_rule {self.coef_rule!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BoostModel:
    """``F(x) = argmax_r sum_j h_j(x) W[j, r]`` over an ordered stump list."""

    stumps: tuple
    W: np.ndarray
    k: int
    loss: str = EXP
    d: int | None = None
    classes: tuple = ()
    config: dict | None = None

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64).reshape(len(self.stumps), self.k)
        if np.any(W < 0):
            raise ValueError("coefficients must be non-negative")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "stumps", tuple(self.stumps))
        object.__setattr__(self, "loss", loss_kind(self.loss))

    @property
    def n(self) -> int:
        return len(self.stumps)

    def scores(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.d is not None and X.shape[1] != self.d:
            raise ValueError(f"expected {self.d} features, got {X.shape[1]}")
        out = np.zeros((X.shape[0], self.k))
        for stump, row in zip(self.stumps, self.W):
            out += stump.predict(X)[:, None] * row
        return out

    def predict(self, X) -> np.ndarray:
        """Classes in ``1..k``; ties go to the lowest class index."""
        return np.argmax(self.scores(X), axis=1) + 1

    def error(self, data: Dataset) -> float:
        return float(np.mean(self.predict(data.features) != data.labels))


def predict(model: BoostModel, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict expects a single feature vector")
    return int(model.predict(x[None, :])[0])


# -- per-round coefficient objectives -------------------------------------

class StageObjective:
    """Objective of one round's coefficient row, with its analytic gradient.

    ``log_cache`` holds ``log u`` for the residual weights left by the frozen
    rounds (``-inf`` marks a zero weight) and ``rho_ir = h_i (w[y_i] - w[r])``
    is the new stump's margin contribution. Exponential loss:
    ``log sum_{i,r} u_ir exp(-rho_ir) + nu ||w||_1``; logistic loss:
    ``sum_{i,r} log(1 + u_ir exp(-rho_ir)) + nu ||w||_1``.
    """

    def __init__(self, log_cache, h_col, labels, nu: float, kind: str):
        self.kind = loss_kind(kind)
        self.log_cache = np.asarray(log_cache, dtype=np.float64)
        self.h = np.asarray(h_col, dtype=np.float64)
        self.y0 = np.asarray(labels) - 1
        m = self.h.shape[0]
        if self.log_cache.ndim != 2 or self.log_cache.shape[0] != m or self.y0.shape != (m,):
            raise ValueError(f"cache shape {self.log_cache.shape} does not match {m} samples")
        if np.any(np.isnan(self.log_cache)) or np.any(self.log_cache == np.inf):
            raise ValueError("cache contains non-finite weights")
        self.nu = nu
        self.rows = np.arange(m)
        self.hcol = self.h[:, None]

    def __call__(self, w):
        w = np.asarray(w, dtype=np.float64)
        a = self.log_cache - self.hcol * (w[self.y0][:, None] - w)
        if self.kind == EXP:
            top = a.max()
            e = np.exp(a - top)
            total = e.sum()
            value = top + math.log(total)
            p = e / total
        else:
            value = float(np.logaddexp(0.0, a).sum())
            p = expit(a)
        v = -p
        v[self.rows, self.y0] += p.sum(axis=1)
        return float(value + self.nu * w.sum()), self.nu - self.h @ v


def stage_objective_exp(w_row, log_cache, h_col, labels, nu: float = 0.0):
    """Exponential-loss round objective and gradient; see :class:`StageObjective`."""
    if np.any(np.asarray(w_row) < 0):
        raise ValueError("coefficients must be non-negative")
    return StageObjective(log_cache, h_col, labels, nu, EXP)(w_row)


def stage_objective_log(w_row, log_cache, h_col, labels, nu: float = 0.0):
    """Logistic-loss round objective and gradient; see :class:`StageObjective`."""
    if np.any(np.asarray(w_row) < 0):
        raise ValueError("coefficients must be non-negative")
    return StageObjective(log_cache, h_col, labels, nu, LOG)(w_row)


def binary_closed_form(u, labels, h) -> np.ndarray:
    """AdaBoost's coefficient for a binary problem, as a two-column W row.

    ``u[i, r]`` are the multi-class duals; for ``k = 2`` the off-label entry
    of each row is proportional to the AdaBoost sample weight.
    """
    u = np.asarray(u)
    z = np.where(np.asarray(labels) == 1, 1.0, -1.0)
    a = u[np.arange(len(z)), np.where(z > 0, 1, 0)]
    eps = a[z != h].sum() / a.sum()
    eps = min(max(eps, MIN_WEIGHTED_ERROR), 1.0 - MIN_WEIGHTED_ERROR)
    alpha = 0.5 * math.log((1.0 - eps) / eps)
    return np.array([alpha, 0.0]) if alpha >= 0 else np.array([0.0, -alpha])


# -- training ---------------------------------------------------------------

@dataclass(frozen=True)
class RoundRecord:
    round: int
    stump: DecisionStump
    r_star: int
    edge: float
    objective: float
    train_err: float
    test_err: float | None
    solve_ms: float


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)
    stop_reason: str = "max_rounds"  # or "stopping_rule"
    final_edge: float | None = None
    final_duals: np.ndarray | None = None

    def __len__(self):
        return len(self.records)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_HEADER)
            for rec in self.records:
                writer.writerow([rec.round, rec.stump.feature, repr(rec.stump.threshold),
                                 rec.stump.polarity, rec.r_star, repr(rec.edge), repr(rec.objective),
                                 rec.train_err, "" if rec.test_err is None else rec.test_err,
                                 f"{rec.solve_ms:.6f}"])


@dataclass
class RoundState:
    """Snapshot handed to the ``callback`` of :func:`train` after each round."""

    round: int
    duals: np.ndarray
    margins: np.ndarray
    stage_objective_before: float
    stage_objective_after: float
    unshrunk_row: np.ndarray
    row: np.ndarray


def _loss_value(rho, kind):
    if kind == EXP:
        return float(logsumexp(-rho))
    return float(np.logaddexp(0.0, -rho).sum())


def train(data: Dataset, cfg: TrainConfig | None = None, eval_data: Dataset | None = None,
          pool: Sequence[DecisionStump] | None = None,
          callback: Callable[[RoundState], None] | None = None) -> tuple[BoostModel, TrainTrace]:
    """Run stage-wise boosting on ``data``.

    ``pool`` restricts the weak learners to a fixed stump list; by default
    every stump on ``data`` is a candidate.
    """
    cfg = cfg or TrainConfig()
    data.require_all_classes()
    kind = cfg.loss
    if cfg.coef_rule == "closed_form" and (data.k != 2 or kind != EXP):
        raise ValueError("closed-form coefficients need k = 2 and the exponential loss")
    X, y = data.features, data.labels
    m, k = data.m, data.k
    searcher = PoolSearcher(data, pool) if pool is not None else StumpSearcher(data)

    scores = np.zeros((m, k))
    eval_scores = None if eval_data is None else np.zeros((eval_data.m, k))
    rho = np.zeros((m, k))
    u = dual_update(rho, kind)
    stumps: list[DecisionStump] = []
    rows: list[np.ndarray] = []
    l1 = 0.0
    trace = TrainTrace()

    for t in range(1, cfg.max_rounds + 1):
        choice = searcher.search(edge_weights(u, y))
        if choice.edge <= cfg.nu + cfg.stop_slack:
            trace.stop_reason = "stopping_rule"
            trace.final_edge = choice.edge
            break
        h = choice.stump.predict(X)
        fun = StageObjective(-rho, h, y, cfg.nu, kind)
        start = time.perf_counter()
        if cfg.coef_rule == "solve":
            w = minimize_box(fun, np.zeros(k), cfg.solver).minimizer
        else:
            w = binary_closed_form(u, y, h)
        solve_ms = (time.perf_counter() - start) * 1e3

        before = fun(np.zeros(k))[0] if callback else math.nan
        after = fun(w)[0] if callback else math.nan
        unshrunk = w.copy()
        w = cfg.eta * w
        if cfg.kappa is not None:
            w = np.minimum(w, cfg.kappa)
        stumps.append(choice.stump)
        rows.append(w)
        l1 += float(w.sum())

        scores += h[:, None] * w
        rho = margins_from_scores(scores, y)
        u = dual_update(rho, kind)
        objective = _loss_value(rho, kind) + cfg.nu * l1
        train_err = float(np.mean(np.argmax(scores, axis=1) + 1 != y))
        test_err = None
        if eval_data is not None:
            eval_scores += choice.stump.predict(eval_data.features)[:, None] * w
            test_err = float(np.mean(np.argmax(eval_scores, axis=1) + 1 != eval_data.labels))
        trace.records.append(RoundRecord(t, choice.stump, choice.r, choice.edge, objective,
                                         train_err, test_err, solve_ms))
        if callback is not None:
            callback(RoundState(t, u, rho, before, after, unshrunk, w))

    trace.final_duals = u
    W = np.array(rows).reshape(len(rows), k)
    model = BoostModel(tuple(stumps), W, k, kind, d=data.d, classes=data.classes,
                       config=cfg.to_dict())
    return model, trace


# -- serialization ----------------------------------------------------------

def model_to_dict(model: BoostModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "loss": model.loss,
        "k": model.k,
        "d": model.d,
        "classes": list(model.classes),
        "stumps": [s.to_dict() for s in model.stumps],
        "W": model.W.tolist(),
        "config": model.config,
    }


def save_model(model: BoostModel, path) -> None:
    with Path(path).open("w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def model_from_dict(obj) -> BoostModel:
    if not isinstance(obj, dict) or obj.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"not a {MODEL_FORMAT} document")
    if obj.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {obj.get('version')!r}")
    try:
        k = int(obj["k"])
        stumps = [DecisionStump.from_dict(s) for s in obj["stumps"]]
        W = np.array(obj["W"], dtype=np.float64)
        if W.size == 0:
            W = np.zeros((0, k))
        if W.shape != (len(stumps), k):
            raise ModelFormatError(f"W has shape {W.shape}, expected ({len(stumps)}, {k})")
        d = obj.get("d")
        return BoostModel(tuple(stumps), W, k, obj["loss"], d=None if d is None else int(d),
                          classes=tuple(obj.get("classes") or ()), config=obj.get("config"))
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"invalid model document: {exc}") from exc


def load_model(path) -> BoostModel:
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno} "
                               f"(char {exc.pos}): {exc.msg}") from exc
    return model_from_dict(obj)
