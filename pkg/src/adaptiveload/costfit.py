"""Benchmark sweep planning, cost-model fitting, and bottleneck analysis.

The cost model is ``step_time ~ a + b * B * S^p``. For each exponent on a
fixed grid the model is linear in (a, b), so every candidate is an ordinary
least-squares fit; the grid winner maximizes R^2, ties toward smaller p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateFit,
    EmptyCatalog,
    EmptyRecords,
    InsufficientData,
    TargetBelowOverhead,
    ZeroSlope,
    ZeroVariance,
)
from .shapes import Bucket

__all__ = [
    "Trial",
    "CostModel",
    "GridSpec",
    "SweepPlan",
    "BottleneckReport",
    "generate_sweep",
    "fit_cost_model",
    "r_squared",
    "derive_m_comp",
    "correlation_report",
    "analyze_bottleneck",
]

LONG_SEQ_THRESHOLD = 20_000


@dataclass(frozen=True)
class Trial:
    batch: int
    seq_len: int
    step_time: float

    def __post_init__(self):
        if self.step_time <= 0:
            raise ValueError("step_time must be positive")


@dataclass(frozen=True)
class CostModel:
    a: float
    b: float
    p: float
    r2: float

    def predict(self, batch: int, seq_len: int) -> float:
        return self.a + self.b * batch * float(seq_len) ** self.p


@dataclass(frozen=True)
class GridSpec:
    p_min: float = 1.6
    p_max: float = 2.4
    p_step: float = 0.05

    def values(self) -> list[float]:
        n = int(round((self.p_max - self.p_min) / self.p_step)) + 1
        return [round(self.p_min + i * self.p_step, 10) for i in range(n)]


@dataclass(frozen=True)
class SweepPlan:
    trials: tuple[tuple[int, int], ...]  # (B, S) requests
    long_seq_threshold: int = LONG_SEQ_THRESHOLD


def generate_sweep(
    catalog: list[Bucket],
    batch_levels_short: int = 2,
    batch_levels_long: int = 4,
    threshold: int = LONG_SEQ_THRESHOLD,
) -> SweepPlan:
    """Batch-size sweep per bucket; long-sequence buckets get more levels.

    Order is deterministic: ascending S, then ascending B.
    """
    if not catalog:
        raise EmptyCatalog("cannot sweep an empty catalog")
    if not (1 <= batch_levels_short <= batch_levels_long):
        raise ValueError("need batch_levels_long >= batch_levels_short >= 1")
    requests = []
    for bucket in sorted(catalog, key=lambda b: b.seq_len):
        levels = batch_levels_long if bucket.seq_len >= threshold else batch_levels_short
        for b in range(1, levels + 1):
            requests.append((b, bucket.seq_len))
    return SweepPlan(tuple(requests), threshold)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Closed-form simple regression y = a + b*x; returns (a, b, r2)."""
    xm = x.mean()
    ym = y.mean()
    sxx = float(((x - xm) ** 2).sum())
    sxy = float(((x - xm) * (y - ym)).sum())
    b = sxy / sxx
    a = ym - b * xm
    ss_res = float(((y - (a + b * x)) ** 2).sum())
    ss_tot = float(((y - ym) ** 2).sum())
    return a, b, 1.0 - ss_res / ss_tot


def fit_cost_model(trials: list[Trial], grid: GridSpec = GridSpec()) -> CostModel:
    """Grid-search the exponent, OLS for (a, b) at each candidate.

    The slope is deliberately unconstrained; a non-positive b surfaces later
    as ZeroSlope in derive_m_comp rather than being clamped here.
    """
    if len(trials) < 3:
        raise InsufficientData(f"need >= 3 trials, got {len(trials)}")
    y = np.array([t.step_time for t in trials], dtype=np.float64)
    if np.ptp(y) == 0.0:
        raise DegenerateFit("all step times equal; R^2 undefined")
    bs = np.array([t.batch for t in trials], dtype=np.float64)
    ss = np.array([t.seq_len for t in trials], dtype=np.float64)

    best: CostModel | None = None
    for p in grid.values():
        x = bs * ss**p
        if np.ptp(x) == 0.0:
            continue
        a, b, r2 = _ols(x, y)
        if best is None or r2 > best.r2:
            best = CostModel(a=a, b=b, p=p, r2=r2)
    if best is None:
        raise InsufficientData("load regressor is constant for every grid exponent")
    return best


def grid_profile(trials: list[Trial], grid: GridSpec = GridSpec()) -> list[tuple[float, float]]:
    """R^2 at every grid exponent, for diagnostics; skips degenerate p."""
    if len(trials) < 3:
        raise InsufficientData(f"need >= 3 trials, got {len(trials)}")
    y = np.array([t.step_time for t in trials], dtype=np.float64)
    bs = np.array([t.batch for t in trials], dtype=np.float64)
    ss = np.array([t.seq_len for t in trials], dtype=np.float64)
    profile = []
    for p in grid.values():
        x = bs * ss**p
        if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
            continue
        profile.append((p, _ols(x, y)[2]))
    return profile


def r_squared(predicted, observed) -> float:
    """Standard coefficient of determination 1 - SS_res / SS_tot."""
    pred = np.asarray(predicted, dtype=np.float64)
    obs = np.asarray(observed, dtype=np.float64)
    if pred.shape != obs.shape or obs.size == 0:
        raise ValueError("predicted and observed must be equal-length, non-empty")
    ss_tot = float(((obs - obs.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ZeroVariance("observed values are constant")
    ss_res = float(((obs - pred) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def derive_m_comp(model: CostModel, target_sync: float) -> float:
    """Back out the compute-load bound that meets a target step latency."""
    if model.b <= 0:
        raise ZeroSlope(f"fitted slope b={model.b} is not positive")
    if target_sync <= model.a:
        raise TargetBelowOverhead(
            f"target_sync={target_sync} does not exceed fixed overhead a={model.a}"
        )
    return (target_sync - model.a) / model.b


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise ZeroVariance("correlation undefined on a constant axis")
    return float(np.corrcoef(x, y)[0, 1])


def correlation_report(trials: list[Trial], p: float) -> dict[str, float]:
    """Pearson correlation of step time with token count B*S and load B*S^p."""
    if len(trials) < 3:
        raise InsufficientData(f"need >= 3 trials, got {len(trials)}")
    t = np.array([tr.step_time for tr in trials], dtype=np.float64)
    bs = np.array([tr.batch for tr in trials], dtype=np.float64)
    ss = np.array([tr.seq_len for tr in trials], dtype=np.float64)
    return {
        "corr_tokens": _pearson(bs * ss, t),
        "corr_load": _pearson(bs * ss**p, t),
    }


@dataclass(frozen=True)
class BottleneckReport:
    mean_wait: tuple[float, ...]  # per worker, seconds
    straggler_fraction: tuple[float, ...]  # per worker, share of steps with wait == 0
    suggested_m_comp: float | None = None


def analyze_bottleneck(
    records,
    model: CostModel | None = None,
    target_sync: float | None = None,
) -> BottleneckReport:
    """Per-worker wait statistics plus an optional M_comp recalibration.

    ``records`` is a sequence of StepRecord from the cluster simulator (or any
    object exposing ``per_worker`` entries with a ``wait_sync`` field).
    """
    if not records:
        raise EmptyRecords("no step records to analyze")
    waits = np.array(
        [[w.wait_sync for w in rec.per_worker] for rec in records], dtype=np.float64
    )
    straggler = (waits == 0.0).mean(axis=0)
    suggestion = None
    if model is not None and target_sync is not None:
        suggestion = derive_m_comp(model, target_sync)
    return BottleneckReport(
        mean_wait=tuple(waits.mean(axis=0)),
        straggler_fraction=tuple(straggler),
        suggested_m_comp=suggestion,
    )
