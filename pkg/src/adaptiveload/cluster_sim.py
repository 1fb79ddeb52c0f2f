"""Synchronous data-parallel step simulator for A/B bucket-policy comparison.

Each step every worker independently draws a bucket, executes its planned
batch under a ground-truth cost model with multiplicative jitter, and the
step latency is the barrier maximum over workers. The simulator emits the
imbalance and throughput metrics used to compare the equal-token baseline
against the dual-constraint policy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costfit import CostModel, GridSpec, Trial, derive_m_comp, fit_cost_model
from .errors import AllZero, PlanMismatch, ZeroMean
from .scheduler import BucketPlan, DualConstraint, TokenBudget, emit_plan, physical_load
from .shapes import Bucket, LatentGeometry, MediaShape, build_catalog, visual_tokens

__all__ = [
    "CostParams",
    "ClusterConfig",
    "WorkerStep",
    "StepRecord",
    "MetricsSeries",
    "RefitConfig",
    "ExperimentResult",
    "sample_assignments",
    "simulate_step",
    "cv_step",
    "compute_cv",
    "throughput",
    "run_policy",
    "run_experiment",
    "default_catalog",
    "default_dual_constraint",
    "default_token_budget",
]

# Minimum multiplicative noise factor; keeps step times strictly positive.
NOISE_FLOOR = 0.01


@dataclass(frozen=True)
class CostParams:
    a: float = 2.0
    b: float = 1e-9
    p: float = 2.0


@dataclass(frozen=True)
class ClusterConfig:
    num_workers: int = 16
    cost: CostParams = field(default_factory=CostParams)
    noise_sigma: float = 0.03
    seed: int = 42
    steps: int = 500

    def __post_init__(self):
        if self.num_workers < 1 or self.steps < 1 or self.noise_sigma < 0:
            raise ValueError("invalid cluster config")


@dataclass(frozen=True)
class WorkerStep:
    bucket: Bucket
    batch_size: int
    exec_time: float  # T_i
    load: int  # O_i = B * S^2
    tokens: int  # B * S
    wait_sync: float


@dataclass(frozen=True)
class StepRecord:
    step: int
    per_worker: tuple[WorkerStep, ...]
    t_sync: float


@dataclass
class MetricsSeries:
    """Per-step metrics for one policy run."""

    t_sync: np.ndarray
    cv_step: np.ndarray  # (max - min) / max over T_i
    time_cv_stdmean: np.ndarray  # 100 * std/mean over T_i
    compute_cv: np.ndarray  # 100 * std/mean over O_i
    compute_cv_range: np.ndarray  # (max - min) / max over O_i
    tokens: np.ndarray  # sum of B_i * S_i
    tokens_per_sec: np.ndarray
    theta: np.ndarray  # latent units / sec

    @property
    def mean_cv_step(self) -> float:
        return float(self.cv_step.mean())

    @property
    def mean_compute_cv(self) -> float:
        return float(self.compute_cv.mean())

    @property
    def mean_theta(self) -> float:
        return float(self.theta.mean())

    @property
    def tokens_per_sec_overall(self) -> float:
        # Conservation form: total tokens over total synchronized time.
        return float(self.tokens.sum() / self.t_sync.sum())


def sample_assignments(
    catalog: list[Bucket],
    weights,
    plan: BucketPlan,
    num_workers: int,
    rng: np.random.Generator,
) -> list[tuple[Bucket, int]]:
    """Independent weighted bucket draw per worker; batch size from the plan."""
    w = np.asarray(weights, dtype=np.float64)
    if len(w) != len(catalog):
        raise PlanMismatch("one weight per bucket required")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {w.sum()}")
    planned = {e.bucket.shape: e.batch_size for e in plan.entries}
    for bucket in catalog:
        if bucket.shape not in planned:
            raise PlanMismatch(f"plan does not cover shape {bucket.shape}")
    idx = rng.choice(len(catalog), size=num_workers, p=w)
    return [(catalog[i], planned[catalog[i].shape]) for i in idx]


def simulate_step(
    assignments: list[tuple[Bucket, int]],
    cfg: ClusterConfig,
    rng: np.random.Generator,
    step: int = 0,
) -> StepRecord:
    """Execute one synchronized step: T_sync is the slowest worker."""
    noise = np.maximum(NOISE_FLOOR, 1.0 + rng.normal(0.0, cfg.noise_sigma, len(assignments)))
    times = []
    for (bucket, b), nz in zip(assignments, noise):
        base = cfg.cost.a + cfg.cost.b * b * float(bucket.seq_len) ** cfg.cost.p
        times.append(base * float(nz))
    t_sync = max(times)
    workers = tuple(
        WorkerStep(
            bucket=bucket,
            batch_size=b,
            exec_time=t,
            load=physical_load(b, bucket.seq_len),
            tokens=b * bucket.seq_len,
            wait_sync=t_sync - t,
        )
        for (bucket, b), t in zip(assignments, times)
    )
    return StepRecord(step=step, per_worker=workers, t_sync=t_sync)


def cv_step(values) -> float:
    """Range-ratio imbalance (max - min) / max."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0 or float(v.max()) <= 0.0:
        raise AllZero("range-ratio CV needs a positive maximum")
    return float((v.max() - v.min()) / v.max())


def compute_cv(loads) -> float:
    """Dispersion of per-worker loads: 100 * population std / mean."""
    v = np.asarray(loads, dtype=np.float64)
    if v.size == 0 or float(v.mean()) == 0.0:
        raise ZeroMean("std/mean CV needs a nonzero mean")
    return float(100.0 * v.std() / v.mean())


def throughput(
    batch: int, shape: MediaShape, geom: LatentGeometry, t: float
) -> float:
    """Latent units processed per second for one worker's batch."""
    if t <= 0:
        raise ValueError("time must be positive")
    units = batch * visual_tokens(shape, geom)
    return units / t


@dataclass(frozen=True)
class RefitConfig:
    """Closed-loop recalibration: refit the cost model from the accumulated
    per-worker trace every `every` steps and re-plan the dual constraint."""

    every: int
    target_sync: float
    m_mem: float
    grid: GridSpec = field(default_factory=GridSpec)


def run_policy(
    catalog: list[Bucket],
    weights,
    plan: BucketPlan,
    cfg: ClusterConfig,
    rng: np.random.Generator,
    geom: LatentGeometry | None = None,
    refit: RefitConfig | None = None,
    collect_records: bool = False,
) -> tuple[MetricsSeries, list[StepRecord], list[Trial]]:
    """Run one policy for cfg.steps steps; optionally refit mid-run."""
    geom = geom or LatentGeometry()
    series = {name: [] for name in (
        "t_sync", "cv_step", "time_cv_stdmean", "compute_cv",
        "compute_cv_range", "tokens", "tokens_per_sec", "theta",
    )}
    records: list[StepRecord] = []
    trials: list[Trial] = []
    current = plan
    for step in range(cfg.steps):
        assignments = sample_assignments(catalog, weights, current, cfg.num_workers, rng)
        rec = simulate_step(assignments, cfg, rng, step)
        times = [w.exec_time for w in rec.per_worker]
        loads = [w.load for w in rec.per_worker]
        tokens = sum(w.tokens for w in rec.per_worker)
        units = sum(
            w.batch_size * visual_tokens(w.bucket.shape, geom) for w in rec.per_worker
        )
        series["t_sync"].append(rec.t_sync)
        series["cv_step"].append(cv_step(times))
        series["time_cv_stdmean"].append(compute_cv(times))
        series["compute_cv"].append(compute_cv(loads))
        series["compute_cv_range"].append(cv_step(loads))
        series["tokens"].append(tokens)
        series["tokens_per_sec"].append(tokens / rec.t_sync)
        series["theta"].append(units / rec.t_sync)
        for w in rec.per_worker:
            trials.append(Trial(w.batch_size, w.bucket.seq_len, w.exec_time))
        if collect_records:
            records.append(rec)
        if refit is not None and (step + 1) % refit.every == 0:
            model = fit_cost_model(trials, refit.grid)
            m_comp = derive_m_comp(model, refit.target_sync)
            current = emit_plan(catalog, DualConstraint(refit.m_mem, m_comp, model.p))
    return (
        MetricsSeries(**{k: np.asarray(v, dtype=np.float64) for k, v in series.items()}),
        records,
        trials,
    )


@dataclass
class ExperimentResult:
    series_a: MetricsSeries
    series_b: MetricsSeries
    summary: dict
    trials_a: list[Trial]
    trials_b: list[Trial]


def run_experiment(
    catalog: list[Bucket],
    weights,
    plan_a: BucketPlan,
    plan_b: BucketPlan,
    cfg: ClusterConfig,
    geom: LatentGeometry | None = None,
    refit_b: RefitConfig | None = None,
) -> ExperimentResult:
    """A/B comparison with independent seed-derived streams per policy."""
    ss = np.random.SeedSequence(cfg.seed)
    child_a, child_b = ss.spawn(2)
    series_a, _, trials_a = run_policy(
        catalog, weights, plan_a, cfg, np.random.default_rng(child_a), geom
    )
    series_b, _, trials_b = run_policy(
        catalog, weights, plan_b, cfg, np.random.default_rng(child_b), geom, refit=refit_b
    )

    def _policy_summary(s: MetricsSeries) -> dict:
        return {
            "mean_t_sync": float(s.t_sync.mean()),
            "mean_cv_step": s.mean_cv_step,
            "mean_time_cv_stdmean": float(s.time_cv_stdmean.mean()),
            "mean_compute_cv": s.mean_compute_cv,
            "mean_compute_cv_range": float(s.compute_cv_range.mean()),
            "mean_theta": s.mean_theta,
            "tokens_per_sec": s.tokens_per_sec_overall,
        }

    sa, sb = _policy_summary(series_a), _policy_summary(series_b)
    summary = {
        "policy_a": sa,
        "policy_b": sb,
        "relative_delta": {
            "tokens_per_sec": sb["tokens_per_sec"] / sa["tokens_per_sec"] - 1.0,
            "theta": sb["mean_theta"] / sa["mean_theta"] - 1.0,
            "compute_cv": (sb["mean_compute_cv"] - sa["mean_compute_cv"])
            / sa["mean_compute_cv"],
            "cv_step": (sb["mean_cv_step"] - sa["mean_cv_step"]) / sa["mean_cv_step"],
        },
    }
    return ExperimentResult(series_a, series_b, summary, trials_a, trials_b)


# --- default long-tail workload --------------------------------------------
#
# Six buckets spanning still images (S=1600) to the longest video shape
# (S=52800), with a long-tail weight distribution. Shapes are all 640x640;
# frame counts are chosen so the default geometry yields the target lengths.

_DEFAULT_SHAPES = [
    (MediaShape(1, 640, 640), 30),  # S = 1600
    (MediaShape(17, 640, 640), 25),  # S = 4800
    (MediaShape(41, 640, 640), 20),  # S = 9600
    (MediaShape(113, 640, 640), 15),  # S = 24000
    (MediaShape(233, 640, 640), 7),  # S = 48000
    (MediaShape(257, 640, 640), 3),  # S = 52800
]


def default_catalog(geom: LatentGeometry | None = None):
    """Default catalog plus normalized sampling weights (by sample count)."""
    geom = geom or LatentGeometry()
    catalog = build_catalog(_DEFAULT_SHAPES, geom)
    total = sum(b.sample_count for b in catalog)
    weights = [b.sample_count / total for b in catalog]
    return catalog, weights


def default_token_budget() -> TokenBudget:
    return TokenBudget(480_000)


def default_dual_constraint() -> DualConstraint:
    # Same memory envelope as the default token budget; compute bound sized
    # so long-sequence buckets are compute-bound while short ones stay
    # memory-bound.
    return DualConstraint(m_mem=480_000, m_comp=3e9, p=2.0)
