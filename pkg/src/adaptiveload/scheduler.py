"""Per-bucket batch sizing policies.

Two policies are supported:

* dual-constraint: B = max(1, min(floor(M_mem / S), floor(M_comp / S^p))),
  intersecting a linear token-capacity bound with a polynomial compute bound;
* equal-token baseline: B = max(1, floor(budget / S)).

Batch sizes and loads are exact Python integers, so B * S^2 never wraps.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import EmptyCatalog
from .shapes import Bucket

__all__ = [
    "Binding",
    "DualConstraint",
    "TokenBudget",
    "PlanEntry",
    "BucketPlan",
    "dual_constraint_batch",
    "equal_token_batch",
    "physical_load",
    "emit_plan",
]


class Binding(enum.Enum):
    MEMORY = "memory"
    COMPUTE = "compute"
    FLOOR = "floor"


@dataclass(frozen=True)
class DualConstraint:
    m_mem: float
    m_comp: float
    p: float

    def __post_init__(self):
        if self.m_mem <= 0 or self.m_comp <= 0 or self.p <= 0:
            raise ValueError("dual constraint bounds and exponent must be positive")


@dataclass(frozen=True)
class TokenBudget:
    budget: int

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("token budget must be >= 1")


@dataclass(frozen=True)
class PlanEntry:
    bucket: Bucket
    batch_size: int
    binding: Binding | None  # None for the equal-token baseline


@dataclass(frozen=True)
class BucketPlan:
    entries: tuple[PlanEntry, ...]

    def batch_for(self, bucket: Bucket) -> int:
        for e in self.entries:
            if e.bucket.shape == bucket.shape:
                return e.batch_size
        raise KeyError(f"no plan entry for shape {bucket.shape}")


def dual_constraint_batch(s: int, c: DualConstraint) -> tuple[int, Binding]:
    """Intersect the memory and compute bounds; floor at B=1.

    The compute bound floors once on the real-valued quotient M_comp / S^p.
    A tie between the two floors reports COMPUTE; FLOOR means both bounds
    fell below one batch and the result was clamped.
    """
    if s < 1:
        raise ValueError(f"sequence length must be >= 1, got {s}")
    mem_floor = math.floor(c.m_mem / s)
    comp_floor = math.floor(c.m_comp / float(s) ** c.p)
    b = min(mem_floor, comp_floor)
    if b < 1:
        return 1, Binding.FLOOR
    return b, (Binding.COMPUTE if comp_floor <= mem_floor else Binding.MEMORY)


def equal_token_batch(s: int, t: TokenBudget) -> int:
    if s < 1:
        raise ValueError(f"sequence length must be >= 1, got {s}")
    return max(1, t.budget // s)


def physical_load(b: int, s: int) -> int:
    """Quadratic attention load proxy B * S^2, exact."""
    if b < 1 or s < 1:
        raise ValueError("batch size and sequence length must be >= 1")
    return int(b) * int(s) * int(s)


def emit_plan(catalog: list[Bucket], policy: DualConstraint | TokenBudget) -> BucketPlan:
    """Apply one sizing policy to every bucket, preserving catalog order."""
    if not catalog:
        raise EmptyCatalog("cannot plan an empty catalog")
    entries = []
    for bucket in catalog:
        if isinstance(policy, DualConstraint):
            b, binding = dual_constraint_batch(bucket.seq_len, policy)
            entries.append(PlanEntry(bucket, b, binding))
        else:
            entries.append(PlanEntry(bucket, equal_token_batch(bucket.seq_len, policy), None))
    return BucketPlan(tuple(entries))
