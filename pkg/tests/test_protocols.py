import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from spatial_aloha.errors import ContractViolation, DomainError
from spatial_aloha.protocols import (
    FeedbackSignal,
    ProtocolStateA1,
    ProtocolStateA2,
    ProtocolStateA3,
    SlotView,
    Ternary,
    a1_probability,
    a2_update,
    a3_probability,
    a3_update,
    b_min,
    success_probability,
)


def enumerate_success(k, p):
    """Sum the probabilities of all transmit patterns with exactly one transmitter."""
    total = 0.0
    for pattern in itertools.product((0, 1), repeat=k):
        if sum(pattern) == 1:
            pr = 1.0
            for fired in pattern:
                pr *= p if fired else 1.0 - p
            total += pr
    return total


def tabulated_infimum(c, k_max=10**6):
    return min(min(c * math.pow(1.0 - c / k, k - 1) for k in range(1, k_max + 1)), c * math.exp(-c))


# -- feedback ------------------------------------------------------------------

@pytest.mark.parametrize("b,ternary,binary", [(0, Ternary.EMPTY, 0), (1, Ternary.SUCCESS, 1),
                                              (2, Ternary.COLLISION, 0), (9, Ternary.COLLISION, 0)])
def test_feedback_levels(b, ternary, binary):
    fb = FeedbackSignal(b)
    assert fb.exact_count == b
    assert fb.ternary == ternary
    assert fb.binary == binary
    t = fb.censor("ternary")
    assert t.ternary == ternary and t.binary == binary
    with pytest.raises(ContractViolation):
        t.exact_count
    bi = fb.censor("binary")
    assert bi.binary == binary
    with pytest.raises(ContractViolation):
        bi.ternary
    with pytest.raises(ContractViolation):
        bi.exact_count
    with pytest.raises(ContractViolation):
        bi.censor("exact")


def test_decentralised_view_hides_backlog():
    assert SlotView(4, True).n_messages == 4
    with pytest.raises(ContractViolation):
        SlotView(4, False).n_messages


# -- a1 ------------------------------------------------------------------------

def test_a1_examples():
    assert a1_probability(ProtocolStateA1(1.0), 4) == 0.25
    assert a1_probability(ProtocolStateA1(2.0), 1) == 1.0
    assert a1_probability(ProtocolStateA1(1.0), 1) == 1.0
    assert a1_probability(ProtocolStateA1(1.0), 0) == 1.0
    # clamped p=1 with one message always succeeds
    assert success_probability(1, a1_probability(ProtocolStateA1(2.0), 1)) == 1.0
    with pytest.raises(DomainError):
        ProtocolStateA1(0.0)


# -- a2 ------------------------------------------------------------------------

def test_a2_examples():
    s = ProtocolStateA2(0.5, 2.0, 0.5)
    assert a2_update(s, FeedbackSignal(3, "ternary")).p == 0.25
    assert a2_update(s, FeedbackSignal(1, "ternary")).p == 0.5
    assert a2_update(ProtocolStateA2(0.5, 2.0, 0.6), FeedbackSignal(0, "ternary")).p == 1.0


def test_a2_parameter_constraints():
    for c1, c2, p in [(1.0, 2.0, 0.5), (0.5, 1.0, 0.5), (0.5, 2.0, 0.0), (0.5, 2.0, 1.1)]:
        with pytest.raises(DomainError):
            ProtocolStateA2(c1, c2, p)


def test_a2_rejects_binary_feedback():
    with pytest.raises(ContractViolation):
        a2_update(ProtocolStateA2(), FeedbackSignal(0, "binary"))


@given(st.lists(st.integers(0, 50), max_size=200), st.integers(0, 10**6))
def test_a2_only_sees_ternary(counts, salt):
    """Perturbing B while keeping min(B, 2) leaves the trajectory unchanged."""
    perturbed = [b if b < 2 else 2 + (b * 7919 + salt) % 40 for b in counts]
    s1 = s2 = ProtocolStateA2(0.5, 2.0, 1.0)
    for a, b in zip(counts, perturbed):
        s1 = a2_update(s1, FeedbackSignal(a, "ternary"))
        s2 = a2_update(s2, FeedbackSignal(b, "ternary"))
        assert s1 == s2
        assert 0.0 < s1.p <= 1.0


# -- a3 ------------------------------------------------------------------------

def test_a3_probability_examples():
    assert a3_probability(ProtocolStateA3(K=1.0), 1) == 1.0
    assert a3_probability(ProtocolStateA3(K=100.0), 1) == 0.01
    s = ProtocolStateA3(K=16.0, eps_spec="inv_quarter")
    assert a3_probability(s, 0) == pytest.approx(0.03125, rel=1e-15)


def test_a3_update_examples():
    s = ProtocolStateA3(C=1.0, K=10.0)
    assert a3_update(s, FeedbackSignal(0, "binary"), 0).K == 11.0
    s = ProtocolStateA3(K=16.0, h_spec="sqrt")
    assert a3_update(s, FeedbackSignal(1, "binary"), 0).K == 20.0
    s = ProtocolStateA3(K=2.0, h_spec="sqrt")
    assert a3_update(s, FeedbackSignal(1, "binary"), 1).K == 1.0


def test_a3_defaults():
    s = ProtocolStateA3()
    assert (s.C, s.K, s.h_spec, s.eps_spec) == (1.0, 1.0, "half", "inv_quarter")
    with pytest.raises(DomainError):
        ProtocolStateA3(K=0.5)
    with pytest.raises(DomainError):
        ProtocolStateA3(h_spec="nope")


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 1)), max_size=300),
       st.sampled_from(["sqrt", "half", "log1p", "cbrt", "pow3_4"]),
       st.sampled_from(["inv_quarter", "inv_sqrt", "inv_log"]))
def test_a3_k_floor(seq, h, eps):
    s = ProtocolStateA3(h_spec=h, eps_spec=eps)
    for b, coin in seq:
        s = a3_update(s, FeedbackSignal(b, "binary"), coin)
        assert s.K >= 1.0
        assert 0.0 < a3_probability(s, coin) <= 1.0


@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 1)), max_size=200), st.integers(0, 1000))
def test_a3_only_sees_binary(seq, salt):
    s1 = s2 = ProtocolStateA3()
    for b, coin in seq:
        other = 1 if b == 1 else (0 if b == 0 else 2 + (b + salt) % 9) if salt % 2 else (b + 2 if b != 1 else 1)
        s1 = a3_update(s1, FeedbackSignal(b, "binary"), coin)
        s2 = a3_update(s2, FeedbackSignal(other, "binary"), coin)
        assert s1 == s2


def test_shape_functions_have_required_monotonicity():
    for name in ("sqrt", "half", "log1p", "cbrt", "pow3_4"):
        s = ProtocolStateA3(h_spec=name)
        vals = [s.h(x) for x in (1, 10, 1e3, 1e6)]
        assert all(a < b for a, b in zip(vals, vals[1:]))
    for name in ("inv_quarter", "inv_sqrt", "inv_log"):
        s = ProtocolStateA3(eps_spec=name)
        vals = [s.eps(x) for x in (100, 1e4, 1e8)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert 0 < vals[-1] < 0.05 or name == "inv_log"


# -- success probabilities -----------------------------------------------------

def test_success_probability_examples():
    assert success_probability(1, 1.0) == 1.0
    assert success_probability(2, 0.5) == 0.5
    assert success_probability(3, 1 / 3) == pytest.approx(4 / 9, rel=1e-14)
    assert success_probability(0, 0.5) == 0.0


@pytest.mark.parametrize("p", [0.1, 0.3, 0.5, 0.9])
def test_success_probability_matches_enumeration(p):
    for k in range(1, 11):
        assert abs(success_probability(k, p) - enumerate_success(k, p)) <= 1e-12


def test_b_min_examples():
    assert b_min(1.0) == pytest.approx(tabulated_infimum(1.0), abs=1e-15)
    assert b_min(1.0) == pytest.approx(0.36787944117144233, rel=1e-15)
    assert b_min(0.5) == pytest.approx(0.3032653298563167, rel=1e-15)
    assert success_probability(1, min(1.0, 1.0 / 1)) == 1.0
    with pytest.raises(DomainError):
        b_min(0.0)


def test_b_min_above_one():
    assert b_min(2.0) == 0.0
    assert 0 < b_min(1.5) <= 1.5 * math.exp(-1.5)


@pytest.mark.parametrize("c", [0.2, 0.5, 0.8, 1.0])
def test_b_min_lower_bounds_sequence(c):
    b = b_min(c)
    for k in range(1, 10**4 + 1):
        s = success_probability(k, c / k)
        assert s > 0 and s >= b
