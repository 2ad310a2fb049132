"""I.i.d. per-slot arrival counts and their placement on the sphere."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from spatial_aloha.errors import DomainError
from spatial_aloha.geometry import SpherePoint, sample_uniform

KINDS = ("poisson", "bernoulli", "deterministic", "finite-pmf")

_PMF_ATOL = 1e-12


@dataclass(frozen=True)
class ArrivalDistribution:
    """Law of the number of messages arriving in one slot.

    Build instances with the classmethods; ``table`` holds ``(count, probability)``
    pairs for the finite kinds.
    """

    kind: str
    rate: float = 0.0
    table: tuple[tuple[int, float], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown arrival kind {self.kind!r}")
        if self.kind == "poisson":
            if not self.rate > 0.0 or math.isinf(self.rate):
                raise DomainError(f"Poisson rate must be positive and finite; got {self.rate!r}")
            return
        if not self.table:
            raise DomainError("finite arrival law needs a probability table")
        counts = [k for k, _ in self.table]
        if len(set(counts)) != len(counts) or any(k < 0 for k in counts):
            raise DomainError("arrival counts must be distinct non-negative integers")
        probs = [pr for _, pr in self.table]
        if any(pr < 0.0 or pr > 1.0 for pr in probs):
            raise DomainError("arrival probabilities must lie in [0, 1]")
        if abs(math.fsum(probs) - 1.0) > _PMF_ATOL:
            raise DomainError(f"arrival probabilities sum to {math.fsum(probs)!r}, not 1")

    @classmethod
    def poisson(cls, rate: float) -> "ArrivalDistribution":
        return cls("poisson", rate=float(rate))

    @classmethod
    def bernoulli(cls, p: float) -> "ArrivalDistribution":
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"Bernoulli probability must lie in [0, 1]; got {p!r}")
        return cls("bernoulli", table=((0, 1.0 - p), (1, p)))

    @classmethod
    def deterministic(cls, k: int) -> "ArrivalDistribution":
        if int(k) != k or k < 0:
            raise DomainError(f"deterministic count must be a non-negative integer; got {k!r}")
        return cls("deterministic", table=((int(k), 1.0),))

    @classmethod
    def finite_pmf(cls, table) -> "ArrivalDistribution":
        """``table`` is a mapping or iterable of ``(count, probability)`` pairs."""
        items = table.items() if hasattr(table, "items") else table
        pairs = tuple(sorted((int(k), float(pr)) for k, pr in items))
        return cls("finite-pmf", table=pairs)

    @property
    def mean(self) -> float:
        if self.kind == "poisson":
            return self.rate
        return math.fsum(k * pr for k, pr in self.table)

    def pmf(self, k: int) -> float:
        if self.kind == "poisson":
            if k < 0:
                return 0.0
            return math.exp(-self.rate + k * math.log(self.rate) - math.lgamma(k + 1))
        return dict(self.table).get(k, 0.0)

    def pmf_array(self, n: int) -> np.ndarray:
        """Probabilities of counts ``0..n-1``."""
        if self.kind == "poisson":
            from scipy.stats import poisson

            return poisson.pmf(np.arange(n), self.rate)
        out = np.zeros(n)
        for k, pr in self.table:
            if k < n:
                out[k] += pr
        return out

    def draw_count(self, rng: np.random.Generator) -> int:
        if self.kind == "poisson":
            return int(rng.poisson(self.rate))
        if len(self.table) == 1:
            return self.table[0][0]
        counts = [k for k, _ in self.table]
        cum = np.cumsum([pr for _, pr in self.table])
        idx = int(np.searchsorted(cum, rng.random(), side="right"))
        return counts[min(idx, len(counts) - 1)]

    def describe(self) -> str:
        if self.kind == "poisson":
            return f"poisson({self.rate!r})"
        body = ",".join(f"{k}:{pr!r}" for k, pr in self.table)
        return f"{self.kind}({body})"


@dataclass(frozen=True)
class ArrivalBatch:
    count: int
    locations: tuple[SpherePoint, ...]
    slot: int

    def __post_init__(self):
        if len(self.locations) != self.count:
            raise DomainError("batch count does not match the number of locations")


def draw_batch(dist: ArrivalDistribution, slot: int, rng: np.random.Generator) -> ArrivalBatch:
    count = dist.draw_count(rng)
    return ArrivalBatch(count, tuple(sample_uniform(rng) for _ in range(count)), slot)


def prob_zero(dist: ArrivalDistribution) -> float:
    """Exact probability that a slot sees no arrivals."""
    if dist.kind == "poisson":
        return math.exp(-dist.rate)
    return dist.pmf(0)


def log_moment_finite(dist: ArrivalDistribution) -> bool:
    """Whether ``E log max(1, xi)`` is finite.

    Every built-in law has a finite mean, hence a finite log-moment.
    """
    return dist.kind in KINDS
