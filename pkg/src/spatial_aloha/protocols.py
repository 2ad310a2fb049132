"""Transmission-probability controllers for the three feedback regimes.

* ``a1``: centralised, knows the number of waiting messages and transmits
  with ``p = c / N``.
* ``a2``: decentralised with ternary feedback (empty / success / collision);
  multiplicative back-off on ``p``.
* ``a3``: decentralised with binary success/non-success feedback; a doubly
  randomised scheme that tracks an auxiliary estimate ``K`` of the backlog.

The pure update functions are the reference semantics. The controller classes
wrap them for the closed-loop reference runner and enforce what each regime is
allowed to observe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from spatial_aloha.errors import ContractViolation, DomainError


class Ternary(IntEnum):
    EMPTY = 0
    SUCCESS = 1
    COLLISION = 2


_LEVELS = ("exact", "ternary", "binary")


class FeedbackSignal:
    """What the channel reveals after a slot, censored to a feedback level.

    ``exact`` exposes the number of transmissions ``B``; ``ternary`` exposes
    ``min(B, 2)``; ``binary`` exposes only whether the slot was a success.
    Reading a field the level hides raises :class:`ContractViolation`.
    """

    __slots__ = ("_count", "level")

    def __init__(self, exact_count: int, level: str = "exact"):
        if exact_count < 0:
            raise DomainError("transmission count cannot be negative")
        if level not in _LEVELS:
            raise DomainError(f"unknown feedback level {level!r}")
        self._count = int(exact_count)
        self.level = level

    def censor(self, level: str) -> "FeedbackSignal":
        if _LEVELS.index(level) < _LEVELS.index(self.level):
            raise ContractViolation(f"cannot refine {self.level} feedback to {level}")
        return FeedbackSignal(self._count, level)

    @property
    def exact_count(self) -> int:
        if self.level != "exact":
            raise ContractViolation(f"exact transmission count is hidden under {self.level} feedback")
        return self._count

    @property
    def ternary(self) -> Ternary:
        if self.level == "binary":
            raise ContractViolation("ternary feedback is hidden under binary feedback")
        return Ternary(min(self._count, 2))

    @property
    def binary(self) -> int:
        return 1 if self._count == 1 else 0

    def __repr__(self):
        return f"FeedbackSignal({self._count}, level={self.level!r})"


# -- named shape functions for the binary-feedback class ---------------------

H_FUNCTIONS = {
    "sqrt": math.sqrt,
    "log1p": math.log1p,
    "cbrt": lambda x: x ** (1.0 / 3.0),
    "half": lambda x: 0.5 * x,
    "pow3_4": lambda x: x ** 0.75,
}

EPS_FUNCTIONS = {
    "inv_quarter": lambda x: min(0.5, x ** -0.25),
    "inv_sqrt": lambda x: min(0.5, x ** -0.5),
    "inv_log": lambda x: min(0.5, 1.0 / math.log(math.e + x)),
}


# -- class a1 ----------------------------------------------------------------

@dataclass(frozen=True)
class ProtocolStateA1:
    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0.0:
            raise DomainError(f"c must be positive; got {self.c!r}")


def a1_probability(state: ProtocolStateA1, n_messages: int) -> float:
    """``min(1, c/N)``; with no messages the value is irrelevant and 1 is returned."""
    if n_messages <= 0:
        return 1.0
    return min(1.0, state.c / n_messages)


# -- class a2 ----------------------------------------------------------------

@dataclass(frozen=True)
class ProtocolStateA2:
    c1: float = 0.5
    c2: float = 2.0
    p: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.c1 < 1.0 < self.c2:
            raise DomainError(f"need 0 < c1 < 1 < c2; got c1={self.c1!r}, c2={self.c2!r}")
        if not 0.0 < self.p <= 1.0:
            raise DomainError(f"p must lie in (0, 1]; got {self.p!r}")


def a2_update(state: ProtocolStateA2, fb: FeedbackSignal) -> ProtocolStateA2:
    outcome = fb.ternary
    if outcome == Ternary.COLLISION:
        return replace(state, p=state.c1 * state.p)
    if outcome == Ternary.SUCCESS:
        return state
    return replace(state, p=min(1.0, state.c2 * state.p))


# -- class a3 ----------------------------------------------------------------

@dataclass(frozen=True)
class ProtocolStateA3:
    C: float = 1.0
    K: float = 1.0
    last_coin: int = 0
    h_spec: str = "half"
    eps_spec: str = "inv_quarter"

    def __post_init__(self):
        if not self.C > 0.0:
            raise DomainError(f"C must be positive; got {self.C!r}")
        if not self.K >= 1.0:
            raise DomainError(f"K must be at least 1; got {self.K!r}")
        if self.h_spec not in H_FUNCTIONS:
            raise DomainError(f"unknown h function {self.h_spec!r}; choose from {sorted(H_FUNCTIONS)}")
        if self.eps_spec not in EPS_FUNCTIONS:
            raise DomainError(f"unknown eps function {self.eps_spec!r}; choose from {sorted(EPS_FUNCTIONS)}")

    def h(self, x: float) -> float:
        return H_FUNCTIONS[self.h_spec](x)

    def eps(self, x: float) -> float:
        return EPS_FUNCTIONS[self.eps_spec](x)


def a3_probability(state: ProtocolStateA3, coin: int) -> float:
    if coin == 1:
        return 1.0 / state.K
    return (1.0 - state.eps(state.K)) / state.K


def a3_update(state: ProtocolStateA3, fb: FeedbackSignal, coin: int) -> ProtocolStateA3:
    K = state.K
    if fb.binary == 0:
        K = K + state.C
    elif coin == 0:
        K = K + state.h(K)
    else:
        K = max(K - state.h(K), 1.0)
    return replace(state, K=K, last_coin=coin)


# -- success probabilities ---------------------------------------------------

def success_probability(k: int, p: float) -> float:
    """Probability that exactly one of ``k`` independent transmitters fires."""
    if k <= 0:
        return 0.0
    if p == 1.0:
        return 1.0 if k == 1 else 0.0
    return k * p * (1.0 - p) ** (k - 1)


def b_min(c: float, k_max: int = 10**6) -> float:
    """Infimum over ``k >= 1`` of the success probability when ``p = min(1, c/k)``.

    The sequence is tabulated for ``k <= k_max`` and compared with its limit
    ``c * exp(-c)``; for ``c <= 1`` the infimum is that limit and is not attained.
    For ``c >= 2`` the clamped probability makes two messages always collide,
    and the infimum is 0.
    """
    if not c > 0.0:
        raise DomainError(f"c must be positive; got {c!r}")
    k = np.arange(1, k_max + 1, dtype=np.float64)
    p = np.minimum(1.0, c / k)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_tail = (k - 1.0) * np.log1p(-p)
    log_tail[k == 1.0] = 0.0
    s = k * p * np.exp(log_tail)
    return float(min(s.min(), c * math.exp(-c)))


# -- controllers -------------------------------------------------------------

class SlotView:
    """Information available to a controller at the start of a slot."""

    __slots__ = ("_n", "_centralised")

    def __init__(self, n_messages: int, centralised: bool):
        self._n = n_messages
        self._centralised = centralised

    @property
    def n_messages(self) -> int:
        if not self._centralised:
            raise ContractViolation("the backlog size is not observable by a decentralised protocol")
        return self._n


class Controller:
    name = ""
    centralised = False
    feedback_level = "binary"

    def probability(self, view: SlotView, rng: np.random.Generator) -> float:
        raise NotImplementedError

    def observe(self, fb: FeedbackSignal) -> None:
        raise NotImplementedError


class CentralisedController(Controller):
    name = "a1"
    centralised = True
    feedback_level = "exact"

    def __init__(self, state: ProtocolStateA1):
        self.state = state

    def probability(self, view, rng):
        return a1_probability(self.state, view.n_messages)

    def observe(self, fb):
        pass


class TernaryController(Controller):
    name = "a2"
    feedback_level = "ternary"

    def __init__(self, state: ProtocolStateA2):
        self.state = state

    def probability(self, view, rng):
        return self.state.p

    def observe(self, fb):
        self.state = a2_update(self.state, fb)


class BinaryController(Controller):
    """The coin for each slot is drawn from ``rng`` when the probability is requested."""

    name = "a3"
    feedback_level = "binary"

    def __init__(self, state: ProtocolStateA3):
        self.state = state
        self._coin = 0

    def probability(self, view, rng):
        self._coin = int(rng.integers(0, 2))
        return a3_probability(self.state, self._coin)

    def observe(self, fb):
        self.state = a3_update(self.state, fb, self._coin)
