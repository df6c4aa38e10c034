"""Bayesian optimization of the six power-law parameters.

A quasi-random design seeds the loop; every later trial maximizes expected
improvement under a GP fitted to the successful trials so far.
"""
from __future__ import annotations

import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import GeoGCError
from .gp import GpSurrogate, expected_improvement, expected_improvement_with_grad
from .weighting import PARAM_NAMES, PowerLawParams

log = logging.getLogger(__name__)

DEFAULT_BOUNDS = {
    "r0": (1.0, 3.0),
    "n": (2.0, 6.0),
    "r0_theta": (1.0, 3.0),
    "n_theta": (2.0, 6.0),
    "r0_phi": (1.0, 4.0),
    "n_phi": (2.0, 6.0),
}
N_CANDIDATES = 4096
N_REFINE = 8


@dataclass(frozen=True)
class HyperparamSpace:
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))

    def __post_init__(self):
        b = {k: (float(v[0]), float(v[1])) for k, v in self.bounds.items()}
        if set(b) != set(PARAM_NAMES):
            raise ValueError(f"bounds must cover exactly {PARAM_NAMES}")
        for k, (lo, hi) in b.items():
            if not lo < hi:
                raise ValueError(f"{k}: lower bound {lo} must be below upper bound {hi}")
            if lo <= 0:
                raise ValueError(f"{k}: bounds must be positive")
        object.__setattr__(self, "bounds", {k: b[k] for k in PARAM_NAMES})

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.bounds[k][0] for k in PARAM_NAMES])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.bounds[k][1] for k in PARAM_NAMES])

    @property
    def dim(self) -> int:
        return len(PARAM_NAMES)

    def from_unit(self, u) -> PowerLawParams:
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
        v = self.lower + u * (self.upper - self.lower)
        return PowerLawParams.from_vector(np.clip(v, self.lower, self.upper))

    def to_unit(self, params: PowerLawParams) -> np.ndarray:
        return (params.to_vector() - self.lower) / (self.upper - self.lower)

    def contains(self, params: PowerLawParams) -> bool:
        v = params.to_vector()
        return bool(np.all(v >= self.lower) and np.all(v <= self.upper))

    def midpoint(self) -> PowerLawParams:
        return PowerLawParams.from_vector((self.lower + self.upper) / 2)


@dataclass
class TrialRecord:
    point: PowerLawParams
    objective: Optional[float]
    trial_index: int
    wall_time: float = 0.0
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_json(self) -> dict:
        d = {"trial_index": self.trial_index}
        d.update(self.point.as_dict())
        d.update(rmse=self.objective, status=self.status, wall_time_sec=self.wall_time)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "TrialRecord":
        point = PowerLawParams(**{k: d[k] for k in PARAM_NAMES})
        return cls(point, d.get("rmse"), int(d["trial_index"]),
                   float(d.get("wall_time_sec", 0.0)), d.get("status", "ok"))


def read_trial_log(path) -> list[TrialRecord]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(TrialRecord.from_json(json.loads(line)))
    return out


def append_trial(path, record: TrialRecord) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record.to_json()) + "\n")


def fit_gp(trials: Sequence[TrialRecord], space: Optional[HyperparamSpace] = None,
           rng=None) -> GpSurrogate:
    """GP over the successful trials, inputs mapped to the unit cube."""
    space = space or HyperparamSpace()
    good = [t for t in trials if t.ok and t.objective is not None]
    if len(good) < 2:
        raise ValueError("fit_gp needs at least two successful trials")
    x = np.array([space.to_unit(t.point) for t in good])
    y = np.array([t.objective for t in good])
    return GpSurrogate.fit(x, y, rng=rng)


def _design(n: int, dim: int, seed: int) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # non power-of-two sample size
        return qmc.Sobol(d=dim, scramble=True, seed=seed).random(n)


def propose_next(surrogate: GpSurrogate, space: HyperparamSpace, rng: np.random.Generator,
                 best: Optional[float] = None, n_candidates: int = N_CANDIDATES,
                 n_refine: int = N_REFINE) -> PowerLawParams:
    """Maximize EI over quasi-random candidates, then polish the top few locally.

    Ties go to the lowest candidate index; a refined point replaces the
    incumbent candidate only if its EI is strictly larger.
    """
    if best is None:
        best = float(np.min(surrogate.y_mean + surrogate.y_scale * surrogate.y))
    cand = _design(n_candidates, space.dim, int(rng.integers(2**31)))
    ei = expected_improvement(surrogate, cand, best)
    order = np.argsort(-ei, kind="stable")
    best_u, best_ei = cand[order[0]], float(ei[order[0]])

    def neg_ei(u):
        val, grad = expected_improvement_with_grad(surrogate, u, best)
        return -val, -grad

    for k in order[:n_refine]:
        res = minimize(neg_ei, cand[k], jac=True, method="L-BFGS-B",
                       bounds=[(0.0, 1.0)] * space.dim)
        u = np.clip(res.x, 0.0, 1.0)
        val = expected_improvement(surrogate, u, best)
        if val > best_ei:
            best_u, best_ei = u, val
    return space.from_unit(best_u)


@dataclass
class OptimizeResult:
    best_params: Optional[PowerLawParams]
    best_objective: float
    trials: list

    def incumbent_trace(self) -> list[float]:
        out, cur = [], math.inf
        for t in self.trials:
            if t.ok and t.objective is not None:
                cur = min(cur, t.objective)
            out.append(cur)
        return out


def initial_trials(total_trials: int) -> int:
    return min(total_trials, max(5, total_trials // 4))


def optimize(evaluate: Callable[[PowerLawParams], float], space: Optional[HyperparamSpace] = None,
             total_trials: int = 20, seed: int = 0, log_path=None,
             history: Sequence[TrialRecord] = ()) -> OptimizeResult:
    """Minimize ``evaluate`` over ``space``.

    Evaluation errors mark the trial as failed and the loop moves on. With
    ``log_path`` every trial is appended as one JSON line; ``history`` (or an
    existing log) resumes from the next trial index.
    """
    if total_trials < 1:
        raise ValueError("total_trials must be >= 1")
    space = space or HyperparamSpace()
    trials = list(history)
    if log_path is not None and not trials:
        trials = read_trial_log(log_path)
    n_init = initial_trials(total_trials)
    design = _design(n_init, space.dim, seed)

    start = max((t.trial_index for t in trials), default=-1) + 1
    for k in range(start, total_trials):
        rng = np.random.default_rng([seed, k])
        good = [t for t in trials if t.ok and t.objective is not None]
        if k < n_init:
            point = space.from_unit(design[k])
        elif len(good) >= 2:
            gp = fit_gp(good, space, rng)
            point = propose_next(gp, space, rng, best=min(t.objective for t in good))
        else:
            point = space.from_unit(rng.random(space.dim))

        t0 = time.perf_counter()
        try:
            value = float(evaluate(point))
            if not math.isfinite(value):
                raise FloatingPointError(f"objective is {value}")
            record = TrialRecord(point, value, k, time.perf_counter() - t0)
        except (GeoGCError, FloatingPointError, ValueError, ArithmeticError) as exc:
            log.warning("trial %d failed: %s", k, exc)
            record = TrialRecord(point, None, k, time.perf_counter() - t0, status="failed")
        trials.append(record)
        if log_path is not None:
            append_trial(log_path, record)

    good = [t for t in trials if t.ok and t.objective is not None]
    if not good:
        return OptimizeResult(None, math.inf, trials)
    best = min(good, key=lambda t: (t.objective, t.trial_index))
    return OptimizeResult(best.point, best.objective, trials)


def random_search(evaluate: Callable[[PowerLawParams], float], space: Optional[HyperparamSpace] = None,
                  total_trials: int = 20, seed: int = 0) -> OptimizeResult:
    """Uniform random baseline with the same budget and bookkeeping."""
    space = space or HyperparamSpace()
    rng = np.random.default_rng(seed)
    trials = []
    for k in range(total_trials):
        point = space.from_unit(rng.random(space.dim))
        trials.append(TrialRecord(point, float(evaluate(point)), k))
    best = min(trials, key=lambda t: (t.objective, t.trial_index))
    return OptimizeResult(best.point, best.objective, trials)


def train_evaluate(parametrization: PowerLawParams, train_set, val_set, config) -> float:
    """Train a geometric GCN with ``parametrization`` and return validation RMSE."""
    from .nn import evaluate, train

    trained = train(train_set, val_set, config, parametrization)
    return evaluate(trained, val_set)
