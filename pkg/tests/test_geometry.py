import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatial_aloha.errors import DomainError
from spatial_aloha.geometry import (
    DIAMETER,
    NORTH_POLE,
    RADIUS,
    SpherePoint,
    audit_partition,
    cap_area,
    chord_distance,
    locate_cell,
    partition_sphere,
    points_in_cells,
    sample_in_cell,
    sample_uniform,
    sample_uniform_array,
)

angles = st.tuples(st.floats(0.0, math.pi), st.floats(0.0, 2 * math.pi, exclude_max=True))


def test_radius_gives_unit_area():
    assert 4 * math.pi * RADIUS**2 == pytest.approx(1.0, rel=1e-15)


def test_sample_uniform_on_sphere(rng):
    for _ in range(100):
        p = sample_uniform(rng)
        assert math.sqrt(p.x**2 + p.y**2 + p.z**2) == pytest.approx(RADIUS, rel=1e-12)


def test_off_sphere_point_rejected():
    with pytest.raises(DomainError):
        SpherePoint(1.0, 0.0, 0.0)


def test_hemisphere_fraction(rng):
    n = 10**6
    pts = sample_uniform_array(rng, n)
    frac = (pts[:, 2] > 0).mean()
    assert abs(frac - 0.5) <= 3 * 0.0005


def test_cap_fraction_near_pole(rng):
    n = 10**6
    pts = sample_uniform_array(rng, n)
    pole = NORTH_POLE.as_array()
    inside = (np.sqrt(((pts - pole) ** 2).sum(axis=1)) <= 0.2).mean()
    # cap of chord radius r has height r^2/(2R); area 2*pi*R*h
    expected = 2 * math.pi * RADIUS * (0.2**2 / (2 * RADIUS))
    sigma = math.sqrt(expected * (1 - expected) / n)
    assert abs(inside - expected) <= 3 * sigma


def test_scalar_and_array_samplers_share_the_cap_law(rng):
    n = 20000
    pts = np.array([sample_uniform(rng).as_array() for _ in range(n)])
    frac = (np.sqrt(((pts - NORTH_POLE.as_array()) ** 2).sum(axis=1)) <= 0.3).mean()
    expected = math.pi * 0.09
    assert abs(frac - expected) <= 3 * math.sqrt(expected * (1 - expected) / n)


def test_chord_examples():
    assert chord_distance(NORTH_POLE, NORTH_POLE) == 0.0
    south = SpherePoint(0.0, 0.0, -RADIUS)
    assert chord_distance(NORTH_POLE, south) == pytest.approx(0.5641895835477563, rel=1e-15)
    equator = SpherePoint(RADIUS, 0.0, 0.0)
    assert chord_distance(NORTH_POLE, equator) == pytest.approx(0.3989422804014327, rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(angles, angles, angles)
def test_chord_is_a_metric(a, b, c):
    p, q, s = (SpherePoint.from_angles(*x) for x in (a, b, c))
    assert chord_distance(p, q) == chord_distance(q, p)
    assert 0.0 <= chord_distance(p, q) <= DIAMETER * (1 + 1e-12)
    assert chord_distance(p, s) <= chord_distance(p, q) + chord_distance(q, s) + 1e-15


def test_cap_area_examples():
    assert cap_area(0.0) == 0.0
    assert cap_area(DIAMETER) == 1.0
    assert cap_area(0.2) == pytest.approx(0.12566370614359174, rel=1e-14)


@pytest.mark.parametrize("r", [-0.1, DIAMETER * 1.01, math.nan])
def test_cap_area_domain(r):
    with pytest.raises(DomainError):
        cap_area(r)


@given(st.floats(0.0, DIAMETER), st.floats(0.0, DIAMETER))
def test_cap_area_increasing(a, b):
    if a <= b:
        assert cap_area(a) <= cap_area(b)
    if b - a > 1e-9:
        assert cap_area(a) < cap_area(b)


def test_partition_full_sphere():
    cells = partition_sphere(DIAMETER)
    assert len(cells) == 1
    assert partition_sphere(1.0) == cells


def test_partition_rejects_non_positive():
    with pytest.raises(DomainError):
        partition_sphere(0.0)


@pytest.mark.parametrize("r", [0.1, 0.3, 0.5])
def test_partition_diameter_bounds(r):
    cells = partition_sphere(r)
    assert all(c.diameter_bound() <= r + 1e-15 for c in cells)
    assert [c.cell_id for c in cells] == list(range(len(cells)))


def test_partition_sampled_pairs_r03(rng):
    for cell in partition_sphere(0.3):
        a = sample_in_cell(rng, cell, 1000)
        b = sample_in_cell(rng, cell, 1000)
        assert np.sqrt(((a - b) ** 2).sum(axis=1)).max() <= 0.3


def test_partition_coverage_r01(rng):
    audit = audit_partition(0.1, rng, pairs=50, coverage_samples=10**5)
    assert audit.coverage_ok
    assert audit.diameter_ok


def test_partition_cells_tile_area():
    # Cells are lat/long rectangles; their exact areas must add to 1.
    total = 0.0
    for c in partition_sphere(0.2):
        dz = math.cos(c.polar_range[0]) - math.cos(c.polar_range[1])
        total += RADIUS**2 * dz * (c.azimuth_range[1] - c.azimuth_range[0])
    assert total == pytest.approx(1.0, rel=1e-12)


def test_locate_north_pole():
    cells = partition_sphere(0.2)
    cid = locate_cell(NORTH_POLE, cells)
    assert cells[cid].band_index == 0
    assert cid == 0


def test_locate_band_boundary_goes_to_lower_index():
    # r = 0.25 gives an even band count, so one band boundary is the equator
    # and a point with z = 0 has polar angle exactly pi/2.
    cells = partition_sphere(0.25)
    p = SpherePoint(RADIUS * math.cos(0.1), RADIUS * math.sin(0.1), 0.0)
    assert p.angles()[0] == math.pi / 2
    upper = [c for c in cells if c.polar_range[1] == math.pi / 2]
    lower = [c for c in cells if c.polar_range[0] == math.pi / 2]
    assert upper and lower
    cid = locate_cell(p, cells)
    assert cells[cid].band_index == upper[0].band_index
    assert cells[cid].contains(*p.angles())
    assert points_in_cells(p.as_array()[None, :], cells)[0] == cid


def test_locate_sector_boundary_goes_to_lower_index():
    cells = partition_sphere(0.2)
    band1 = [c for c in cells if c.band_index == 1]
    mid = 0.5 * sum(band1[0].polar_range)
    # azimuth 0 is exact for y = 0, x > 0; pi is exact for y = 0, x < 0
    st = math.sin(mid) * RADIUS
    q = SpherePoint(-st, 0.0, math.cos(mid) * RADIUS)
    assert q.angles()[1] == math.pi
    candidates = [c for c in band1 if c.contains(*q.angles())]
    cid = locate_cell(q, cells)
    assert cid == min(c.cell_id for c in candidates)


def test_locate_matches_vectorised_and_contains(rng):
    cells = partition_sphere(0.15)
    pts = sample_uniform_array(rng, 3000)
    ids = points_in_cells(pts, cells)
    for p, cid in zip(pts, ids):
        sp = SpherePoint(*p)
        assert locate_cell(sp, cells) == cid
        assert cells[cid].contains(*sp.angles())
