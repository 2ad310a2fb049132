"""Steady-state statistics and exact oracles.

Delay estimates use batch means with Student-t intervals. The chain oracle
solves the backlog chain exactly in the regime ``r >= 2R``, where a success
empties the system; its mean delay follows from Little's identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from spatial_aloha.engine import Trace
from spatial_aloha.errors import DomainError
from spatial_aloha.geometry import DIAMETER, cap_area, partition_sphere
from spatial_aloha.protocols import b_min, success_probability
from spatial_aloha.traffic import ArrivalDistribution, prob_zero

STABLE = "stable-evidence"
UNSTABLE = "unstable-evidence"
INCONCLUSIVE = "inconclusive"

MIN_PER_BATCH = 10


def _traces(x) -> list:
    return [x] if isinstance(x, Trace) else list(x)


def t_half_width(values: np.ndarray, level: float = 0.95) -> float:
    k = len(values)
    if k < 2:
        return math.inf
    sd = float(np.std(values, ddof=1))
    return float(stats.t.ppf(0.5 + level / 2, k - 1)) * sd / math.sqrt(k)


# -- delay ---------------------------------------------------------------------

@dataclass(frozen=True)
class DelayEstimate:
    mean_delay: float
    half_width: float
    n_departures: int
    warmup_slots: int
    batch_count: int
    status: str = "ok"

    @property
    def conclusive(self) -> bool:
        return self.status == "ok"

    def interval(self) -> tuple[float, float]:
        return self.mean_delay - self.half_width, self.mean_delay + self.half_width


def _departure_groups(trace: Trace, warmup: int):
    """(count, delay total) per departure record after warmup; one record per message when recorded."""
    if trace.recorded:
        keep = trace.departure_slot >= warmup
        d = (trace.departure_slot - trace.departure_arrival)[keep]
        return np.ones(len(d), dtype=np.int64), d.astype(np.int64)
    counts = trace.removed[warmup:]
    sums = trace.delay_sum[warmup:]
    keep = counts > 0
    return counts[keep], sums[keep]


def _batch_means(counts: np.ndarray, sums: np.ndarray, batches: int) -> np.ndarray:
    total = counts.sum()
    mid = np.cumsum(counts) - 0.5 * counts
    idx = np.minimum(batches - 1, (mid * batches / total).astype(np.int64))
    bc = np.bincount(idx, weights=counts, minlength=batches)
    bs = np.bincount(idx, weights=sums, minlength=batches)
    ok = bc > 0
    return bs[ok] / bc[ok]


def estimate_mean_delay(departures, warmup: int = 0, batches: int = 32) -> DelayEstimate:
    """Batch-means estimate of the mean delay from post-warmup departures.

    ``departures`` is a :class:`Trace`, a list of traces (pooled, ``batches``
    batches from each), or a plain sequence of per-message delays, in which
    case ``warmup`` drops that many leading records. A trace without
    per-message records is batched at slot granularity, so batch sizes are
    equal up to one slot's departures.

    With fewer than ``10 * batches`` departures per trace the result is
    marked inconclusive and carries no estimate.
    """
    if isinstance(departures, Trace) or (isinstance(departures, (list, tuple))
                                         and departures and isinstance(departures[0], Trace)):
        groups = [_departure_groups(t, warmup) for t in _traces(departures)]
    else:
        d = np.asarray(departures, dtype=np.int64)[warmup:]
        groups = [(np.ones(len(d), dtype=np.int64), d)]

    n_dep = int(sum(c.sum() for c, _ in groups))
    if any(c.sum() < MIN_PER_BATCH * batches for c, _ in groups):
        return DelayEstimate(math.nan, math.nan, n_dep, warmup, 0, INCONCLUSIVE)
    means = np.concatenate([_batch_means(c, s, batches) for c, s in groups])
    mean = float(sum(s.sum() for _, s in groups)) / n_dep
    return DelayEstimate(mean, t_half_width(means), n_dep, warmup, len(means))


def littles_law_check(trace, estimate: DelayEstimate, lam: float) -> float:
    """Relative gap between the time-average backlog and ``lam * mean_delay`` over the estimate's window."""
    traces = _traces(trace)
    w = estimate.warmup_slots
    mean_n = float(np.mean(np.concatenate([t.n_before[w:] for t in traces])))
    return abs(mean_n - lam * estimate.mean_delay) / mean_n


def mean_backlog(trace, warmup: int = 0) -> float:
    return float(np.mean(np.concatenate([t.n_before[warmup:] for t in _traces(trace)])))


# -- regeneration --------------------------------------------------------------

@dataclass
class RegenerationReport:
    cycle_lengths: list
    gamma_samples: list
    q_lower_bound: float
    n_cells: int
    a: float
    b: float

    def survival(self, n_max: int) -> np.ndarray:
        """Empirical ``P(gamma > n)`` for ``n = 0..n_max``; a missing gamma counts as larger than ``n_max``."""
        g = np.array([n_max + 1 if x is None else x for x in self.gamma_samples])
        return np.array([(g > n).mean() for n in range(n_max + 1)])

    def tail_bound(self, n_max: int) -> np.ndarray:
        return (1.0 - self.q_lower_bound) ** np.arange(n_max + 1)


def _clearing_slots(trace: Trace) -> np.ndarray:
    # A slot qualifies when nothing arrives and the system is empty or has a success.
    return (trace.arrivals == 0) & ((trace.n_before == 0) | (trace.b_count == 1))


def first_clearing_block(trace: Trace, n_cells: int) -> Optional[int]:
    """Smallest ``k >= 1`` such that slots ``k*M .. k*M + M - 1`` all qualify; None if never within the trace."""
    ok = _clearing_slots(trace)
    n_blocks = len(ok) // n_cells
    if n_blocks < 2:
        return None
    blocks = ok[: n_blocks * n_cells].reshape(n_blocks, n_cells).all(axis=1)
    hits = np.flatnonzero(blocks[1:])
    return int(hits[0]) + 1 if len(hits) else None


def empty_epochs(trace: Trace) -> np.ndarray:
    return np.flatnonzero(trace.n_before == 0)


def detect_regenerations(trace, arrivals: ArrivalDistribution, c: float = 1.0,
                         r: float = DIAMETER) -> RegenerationReport:
    """Empty-system cycles and first clearing-event block of centralised runs.

    ``q = a**M * b**M`` with ``a = P(no arrivals)``, ``b`` the infimum of the
    success probability and ``M`` the size of the bounded-diameter partition
    for radius ``r``.
    """
    traces = _traces(trace)
    n_cells = len(partition_sphere(r))
    a = prob_zero(arrivals)
    b = b_min(c)
    cycles = []
    gammas = []
    for t in traces:
        cycles.extend(np.diff(empty_epochs(t)).tolist())
        gammas.append(first_clearing_block(t, n_cells))
    return RegenerationReport(cycles, gammas, a**n_cells * b**n_cells, n_cells, a, b)


# -- exact chain for r >= 2R ---------------------------------------------------

@dataclass
class ChainOracleResult:
    stationary_pmf: np.ndarray
    mean_n: float
    mean_delay_littles: float
    truncation_mass: float
    reliable: bool
    iterations: int
    residual: float


def full_clear_transition_matrix(arrivals: ArrivalDistribution, c: float, n_max: int) -> np.ndarray:
    """Backlog transitions when a success empties the system; overflow is lumped into ``n_max``."""
    size = n_max + 1
    f = arrivals.pmf_array(size)
    P = np.zeros((size, size))
    for n in range(size):
        s = success_probability(n, min(1.0, c / n)) if n > 0 else 0.0
        P[n, :] += s * f
        P[n, n_max] += s * max(0.0, 1.0 - f.sum())
        stay = 1.0 - s
        reach = size - n
        P[n, n:] += stay * f[:reach]
        P[n, n_max] += stay * max(0.0, 1.0 - f[:reach].sum())
    return P


def chain_oracle(lam=None, c: float = 1.0, n_max: int = 2000, arrivals: Optional[ArrivalDistribution] = None,
                 tol: float = 1e-12, max_iter: int = 100_000, truncation_tol: float = 1e-8) -> ChainOracleResult:
    """Stationary backlog law of the full-clear chain by power iteration.

    Arrivals are Poisson(``lam``) unless ``arrivals`` is given. The result is
    flagged unreliable when the mass sitting at ``n_max`` exceeds
    ``truncation_tol``.
    """
    if arrivals is None:
        if lam is None:
            raise DomainError("give either a Poisson rate or an arrival law")
        arrivals = ArrivalDistribution.poisson(lam)
    rate = arrivals.mean
    if not rate > 0.0:
        raise DomainError("mean arrival rate must be positive")
    P = full_clear_transition_matrix(arrivals, c, n_max)
    pi = np.full(n_max + 1, 1.0 / (n_max + 1))
    for it in range(1, max_iter + 1):
        nxt = pi @ P
        nxt /= nxt.sum()
        delta = np.abs(nxt - pi).sum()
        pi = nxt
        if delta < tol:
            break
    residual = float(np.abs(pi @ P - pi).max())
    mean_n = float(np.arange(n_max + 1) @ pi)
    trunc = float(pi[-1])
    return ChainOracleResult(pi, mean_n, mean_n / rate, trunc, trunc < truncation_tol, it, residual)


def conjecture_bound(r: float) -> float:
    """``e / S_r``, the upper bound on the large-load mean-delay plateau."""
    if not r > 0.0:
        raise DomainError(f"radius must be positive; got {r!r}")
    return math.e / cap_area(r)


# -- stationarity --------------------------------------------------------------

@dataclass
class ProbeResult:
    verdict: str
    third_means: list = field(default_factory=list)
    third_half_widths: list = field(default_factory=list)
    growth_ratio: float = math.nan
    slope: float = math.nan
    slope_pvalue: float = math.nan


def stationarity_probe(trace, warmup: int = 0, min_length: int = 300, batches_per_third: int = 10,
                       alpha: float = 0.01) -> ProbeResult:
    """Empirical stability check on the backlog series; evidence only, never proof.

    The post-warmup series (averaged over replications when several traces
    are given) is cut into thirds. Overlapping 95% intervals for the first and
    last third with no significant upward drift count as stable evidence; a
    significant positive drift with separated thirds counts as unstable
    evidence.
    """
    if isinstance(trace, np.ndarray):
        n = trace[warmup:].astype(np.float64)
    else:
        n = np.mean([t.n_before[warmup:] for t in _traces(trace)], axis=0)
    if len(n) < min_length:
        return ProbeResult(INCONCLUSIVE)

    thirds = np.array_split(n, 3)
    means = [float(t.mean()) for t in thirds]
    hws = [t_half_width(np.array([b.mean() for b in np.array_split(t, batches_per_third)])) for t in thirds]
    ratio = means[2] / means[0] if means[0] > 0 else (math.inf if means[2] > 0 else 1.0)

    bm = np.array([b.mean() for b in np.array_split(n, 3 * batches_per_third)])
    x = np.arange(len(bm), dtype=np.float64)
    fit = stats.linregress(x, bm)
    if fit.stderr > 0:
        pval = float(stats.t.sf(fit.slope / fit.stderr, len(bm) - 2))
    else:
        pval = 0.0 if fit.slope > 0 else 1.0
    rising = fit.slope > 0 and pval < alpha

    lo_first, hi_first = means[0] - hws[0], means[0] + hws[0]
    lo_last, hi_last = means[2] - hws[2], means[2] + hws[2]
    overlap = lo_last <= hi_first and lo_first <= hi_last

    if overlap and not rising:
        verdict = STABLE
    elif rising and not overlap and means[2] > means[0]:
        verdict = UNSTABLE
    else:
        verdict = INCONCLUSIVE
    return ProbeResult(verdict, means, hws, ratio, float(fit.slope), pval)
