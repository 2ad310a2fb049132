import math

import numpy as np
import pytest

from spatial_aloha.errors import DomainError
from spatial_aloha.geometry import NORTH_POLE, RADIUS
from spatial_aloha.traffic import ArrivalDistribution, draw_batch, log_moment_finite, prob_zero


def test_deterministic_zero_batch(rng):
    b = draw_batch(ArrivalDistribution.deterministic(0), 7, rng)
    assert b.count == 0 and b.locations == () and b.slot == 7


def test_poisson_mean(rng):
    dist = ArrivalDistribution.poisson(5)
    counts = np.array([dist.draw_count(rng) for _ in range(10**5)])
    assert abs(counts.mean() - 5) <= 3 * math.sqrt(5 / 10**5)


def test_bernoulli_zero_fraction(rng):
    dist = ArrivalDistribution.bernoulli(0.2)
    counts = np.array([dist.draw_count(rng) for _ in range(10**5)])
    assert abs((counts == 0).mean() - 0.8) <= 3 * math.sqrt(0.16 / 10**5)


def test_finite_pmf_total_variation(rng):
    table = {0: 0.5, 1: 0.2, 3: 0.25, 7: 0.05}
    dist = ArrivalDistribution.finite_pmf(table)
    counts = np.array([dist.draw_count(rng) for _ in range(10**5)])
    emp = {k: (counts == k).mean() for k in set(counts.tolist()) | set(table)}
    tv = 0.5 * sum(abs(emp.get(k, 0.0) - table.get(k, 0.0)) for k in emp)
    assert tv <= 0.01


def test_prob_zero_examples():
    assert prob_zero(ArrivalDistribution.poisson(1)) == pytest.approx(0.36787944117144233, rel=1e-15)
    assert prob_zero(ArrivalDistribution.deterministic(3)) == 0.0
    assert prob_zero(ArrivalDistribution.finite_pmf({0: 0.8, 1: 0.2})) == 0.8


def test_log_moment_finite_for_builtins():
    for dist in (ArrivalDistribution.poisson(10), ArrivalDistribution.finite_pmf({0: 0.5, 4: 0.5}),
                 ArrivalDistribution.deterministic(2), ArrivalDistribution.bernoulli(0.3)):
        assert log_moment_finite(dist)


@pytest.mark.parametrize("bad", [
    lambda: ArrivalDistribution.poisson(0),
    lambda: ArrivalDistribution.finite_pmf({0: 0.5, 1: 0.4}),
    lambda: ArrivalDistribution.finite_pmf({-1: 1.0}),
    lambda: ArrivalDistribution.bernoulli(1.5),
    lambda: ArrivalDistribution.deterministic(-2),
    lambda: ArrivalDistribution("zipf", 1.0),
])
def test_invalid_laws(bad):
    with pytest.raises(DomainError):
        bad()


def test_pooled_locations_uniform(rng):
    dist = ArrivalDistribution.poisson(4)
    pts = []
    for n in range(5000):
        pts.extend(p.as_array() for p in draw_batch(dist, n, rng).locations)
    pts = np.array(pts)
    assert np.allclose(np.linalg.norm(pts, axis=1), RADIUS, rtol=1e-12)
    frac = (np.linalg.norm(pts - NORTH_POLE.as_array(), axis=1) <= 0.25).mean()
    expected = math.pi * 0.0625
    assert abs(frac - expected) <= 3 * math.sqrt(expected * (1 - expected) / len(pts))


def test_pmf_array_matches_pmf():
    dist = ArrivalDistribution.poisson(3.5)
    arr = dist.pmf_array(20)
    assert arr == pytest.approx([dist.pmf(k) for k in range(20)], rel=1e-12)
    assert ArrivalDistribution.finite_pmf({2: 1.0}).pmf_array(4).tolist() == [0, 0, 1, 0]
