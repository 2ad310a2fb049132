"""Slot dynamics: transmissions, spatial multiple departure, arrivals and delays.

In slot ``n`` every waiting message transmits independently with
probability ``p_n``. If exactly one transmits, it leaves together with all
messages within chord distance ``r`` of it. Messages arriving during slot
``n`` join the system afterwards and first contend in slot ``n + 1``, so
``N_{n+1} = N_n - V_n + xi_n``. A message that arrives in slot ``a`` and
leaves in slot ``m`` has delay ``m - a``; messages present at the start carry
arrival slot ``-1``.

:func:`step` and :func:`run_reference` are the readable reference
implementation. :func:`run` drives the compiled kernel and is what every
long experiment uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from spatial_aloha import _kernel
from spatial_aloha.config import ExperimentConfig
from spatial_aloha.errors import DomainError
from spatial_aloha.geometry import DIAMETER, SpherePoint, chord_distance, sample_uniform
from spatial_aloha.protocols import (
    BinaryController,
    CentralisedController,
    FeedbackSignal,
    ProtocolStateA1,
    ProtocolStateA2,
    ProtocolStateA3,
    SlotView,
    TernaryController,
)
from spatial_aloha.traffic import ArrivalBatch, ArrivalDistribution, draw_batch


@dataclass(frozen=True)
class MessageRecord:
    location: SpherePoint
    arrival_slot: int
    message_id: int


@dataclass
class SystemState:
    messages: list = field(default_factory=list)
    slot: int = 0
    next_id: int = 0

    @property
    def n(self) -> int:
        return len(self.messages)

    @classmethod
    def with_messages(cls, locations, arrival_slot: int = -1) -> "SystemState":
        msgs = [MessageRecord(loc, arrival_slot, i) for i, loc in enumerate(locations)]
        return cls(msgs, 0, len(msgs))


@dataclass(frozen=True)
class SlotTrace:
    slot: int
    n_before: int
    p: float
    b_count: int
    success: int
    removed: int
    arrivals: int
    departures: tuple = ()
    transmitter: Optional[int] = None


def neighbours_within(state: SystemState, center: MessageRecord, r: float) -> list:
    """All messages (``center`` included) within chord distance ``r`` of ``center``; closed ball."""
    if r >= DIAMETER:
        return list(state.messages)
    return [m for m in state.messages if chord_distance(m.location, center.location) <= r]


def step(state: SystemState, p: float, r: float, rng: np.random.Generator,
         arrivals: ArrivalBatch) -> tuple[SystemState, SlotTrace]:
    """Advance one slot with a coin per message."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"transmission probability must lie in [0, 1]; got {p!r}")
    if not 0.0 <= r <= DIAMETER:
        raise DomainError(f"departure radius must lie in [0, 2R]; got {r!r}")
    if arrivals.slot != state.slot:
        raise DomainError(f"arrival batch is for slot {arrivals.slot}, state is at slot {state.slot}")

    n = state.n
    fired = np.flatnonzero(rng.random(n) < p) if n else np.empty(0, dtype=np.int64)
    b = len(fired)
    survivors = state.messages
    departures = ()
    transmitter = None
    if b == 1:
        center = state.messages[int(fired[0])]
        transmitter = center.message_id
        leaving = neighbours_within(state, center, r)
        gone = {m.message_id for m in leaving}
        survivors = [m for m in state.messages if m.message_id not in gone]
        departures = tuple((m.message_id, state.slot - m.arrival_slot) for m in leaving)

    next_id = state.next_id
    new = []
    for loc in arrivals.locations:
        new.append(MessageRecord(loc, state.slot, next_id))
        next_id += 1
    trace = SlotTrace(state.slot, n, p, b, int(b == 1), len(departures), arrivals.count,
                      departures, transmitter)
    return SystemState(list(survivors) + new, state.slot + 1, next_id), trace


def make_controller(config: ExperimentConfig):
    if config.protocol == "a1":
        return CentralisedController(ProtocolStateA1(config.c))
    if config.protocol == "a2":
        return TernaryController(ProtocolStateA2(config.c1, config.c2, config.p1))
    return BinaryController(ProtocolStateA3(config.C, config.K1, 0, config.h, config.eps))


def run_reference(config: ExperimentConfig, rng: np.random.Generator, controller=None) -> list:
    """Closed loop over :func:`step`; slow, meant for small horizons and audits.

    The controller sees the backlog only if it is centralised and receives
    feedback censored to its own level.
    """
    controller = controller or make_controller(config)
    dist = config.arrival_distribution()
    state = SystemState.with_messages([sample_uniform(rng) for _ in range(config.initial_messages)])
    rows = []
    for _ in range(config.horizon):
        view = SlotView(state.n, controller.centralised)
        p = controller.probability(view, rng)
        batch = draw_batch(dist, state.slot, rng)
        state, row = step(state, p, config.r, rng, batch)
        controller.observe(FeedbackSignal(row.b_count).censor(controller.feedback_level))
        rows.append(row)
    return rows


@dataclass
class Trace:
    """Columnar record of one replication; indexing yields :class:`SlotTrace` rows.

    ``delay_sum[n]`` is the total delay of the messages that left in slot
    ``n``. The per-departure columns are filled only when departures were
    recorded.
    """

    n_before: np.ndarray
    p: np.ndarray
    b_count: np.ndarray
    removed: np.ndarray
    arrivals: np.ndarray
    delay_sum: np.ndarray
    coin: np.ndarray
    departure_id: Optional[np.ndarray] = None
    departure_arrival: Optional[np.ndarray] = None
    departure_slot: Optional[np.ndarray] = None
    n_final: int = 0

    def __len__(self):
        return len(self.n_before)

    @property
    def success(self) -> np.ndarray:
        return (self.b_count == 1).astype(np.int64)

    @property
    def n_after(self) -> np.ndarray:
        return self.n_before - self.removed + self.arrivals

    @property
    def recorded(self) -> bool:
        return self.departure_id is not None

    def __getitem__(self, n: int) -> SlotTrace:
        deps = ()
        if self.recorded:
            lo, hi = np.searchsorted(self.departure_slot, [n, n + 1])
            deps = tuple((int(i), int(n - a)) for i, a in
                         zip(self.departure_id[lo:hi], self.departure_arrival[lo:hi]))
        return SlotTrace(n, int(self.n_before[n]), float(self.p[n]), int(self.b_count[n]),
                         int(self.b_count[n] == 1), int(self.removed[n]), int(self.arrivals[n]), deps)

    def __iter__(self):
        for n in range(len(self)):
            yield self[n]

    def delays(self) -> np.ndarray:
        if not self.recorded:
            raise ValueError("departures were not recorded for this trace")
        return self.departure_slot - self.departure_arrival


def _arrival_args(dist: ArrivalDistribution):
    if dist.kind == "poisson":
        return _kernel.ARR_POISSON, dist.rate, np.zeros(1, dtype=np.int64), np.ones(1)
    values = np.array([k for k, _ in dist.table], dtype=np.int64)
    cum = np.cumsum([pr for _, pr in dist.table])
    cum[-1] = 1.0
    return _kernel.ARR_TABLE, 0.0, values, cum


def _protocol_args(config: ExperimentConfig):
    if config.protocol == "a1":
        return _kernel.PROTO_A1, np.array([config.c, 0.0, 0.0])
    if config.protocol == "a2":
        return _kernel.PROTO_A2, np.array([config.c1, config.c2, config.p1])
    return _kernel.PROTO_A3, np.array([config.C, config.K1, 0.0])


def run(config: ExperimentConfig, rng: np.random.Generator, record_departures: bool = False,
        horizon: Optional[int] = None) -> Trace:
    """Simulate ``config.horizon`` slots (or ``horizon`` if given) with the compiled kernel."""
    horizon = config.horizon if horizon is None else int(horizon)
    proto, pparams = _protocol_args(config)
    kind, rate, values, cum = _arrival_args(config.arrival_distribution())
    out = _kernel.simulate(
        rng, horizon, float(config.r), proto, pparams,
        _kernel.H_CODES[config.h], _kernel.EPS_CODES[config.eps],
        kind, rate, values, cum, config.initial_messages, config.bands, record_departures,
    )
    n_before, p, b, v, xi, dsum, coin, rid, rarr, rdep, n_final = out
    trace = Trace(n_before, p, b, v, xi, dsum, coin, n_final=int(n_final))
    if record_departures:
        # Departures within a slot are stored in removal order; sort by id for stable output.
        order = np.lexsort((rid, rdep))
        trace.departure_id = rid[order]
        trace.departure_arrival = rarr[order]
        trace.departure_slot = rdep[order]
    return trace
