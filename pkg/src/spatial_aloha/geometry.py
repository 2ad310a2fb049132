"""Sphere arena: sampling, chord distances, cap areas and a bounded-diameter partition.

The sphere has unit area, so its radius is ``R = 1/sqrt(4*pi)`` and its
diameter ``2R = 1/sqrt(pi)``. All distances are straight-line (chord)
distances in R^3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from spatial_aloha.errors import DomainError

RADIUS = 1.0 / math.sqrt(4.0 * math.pi)
DIAMETER = 2.0 * RADIUS

_ON_SPHERE_RTOL = 1e-12


@dataclass(frozen=True)
class SpherePoint:
    x: float
    y: float
    z: float

    def __post_init__(self):
        norm = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if abs(norm - RADIUS) > _ON_SPHERE_RTOL * RADIUS:
            raise DomainError(f"point at distance {norm!r} from the centre is not on the sphere")

    @classmethod
    def from_vector(cls, v) -> "SpherePoint":
        """Project a non-zero 3-vector radially onto the sphere."""
        x, y, z = (float(c) for c in v)
        norm = math.sqrt(x * x + y * y + z * z)
        if norm == 0.0:
            raise DomainError("cannot project the zero vector onto the sphere")
        s = RADIUS / norm
        return cls(x * s, y * s, z * s)

    @classmethod
    def from_angles(cls, polar: float, azimuth: float) -> "SpherePoint":
        st = math.sin(polar)
        return cls.from_vector((st * math.cos(azimuth), st * math.sin(azimuth), math.cos(polar)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def angles(self) -> tuple[float, float]:
        """Polar angle in [0, pi] and azimuth in [0, 2*pi)."""
        polar = math.acos(min(1.0, max(-1.0, self.z / RADIUS)))
        azimuth = math.atan2(self.y, self.x)
        if azimuth < 0.0:
            azimuth += 2.0 * math.pi
        if azimuth >= 2.0 * math.pi:
            azimuth = 0.0
        return polar, azimuth


NORTH_POLE = SpherePoint(0.0, 0.0, RADIUS)


def sample_uniform(rng: np.random.Generator) -> SpherePoint:
    """Draw one point uniformly on the sphere (normalised isotropic Gaussian)."""
    while True:
        v = rng.standard_normal(3)
        norm = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        if norm > 0.0:
            s = RADIUS / norm
            return SpherePoint(v[0] * s, v[1] * s, v[2] * s)


def sample_uniform_array(rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` uniform points as an ``(n, 3)`` array; same law as :func:`sample_uniform`."""
    v = rng.standard_normal((n, 3))
    norms = np.sqrt(np.einsum("ij,ij->i", v, v))
    # A zero Gaussian vector has probability zero; redraw rather than divide by it.
    bad = norms == 0.0
    while bad.any():
        v[bad] = rng.standard_normal((int(bad.sum()), 3))
        norms = np.sqrt(np.einsum("ij,ij->i", v, v))
        bad = norms == 0.0
    return v * (RADIUS / norms)[:, None]


def chord_distance(p: SpherePoint, q: SpherePoint) -> float:
    dx = p.x - q.x
    dy = p.y - q.y
    dz = p.z - q.z
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def cap_area(r: float) -> float:
    """Area of the set of sphere points within chord distance ``r`` of a fixed point.

    A chord of length ``r`` subtends a cap of height ``h = r**2 / (2R)``, so the
    area is ``2*pi*R*h = pi*r**2``. The full sphere (``r = 2R``) has area 1.
    """
    if not (0.0 <= r <= DIAMETER) or math.isnan(r):
        raise DomainError(f"cap radius must lie in [0, 2R]; got {r!r}")
    if r == DIAMETER:
        return 1.0
    return math.pi * r * r


@dataclass(frozen=True)
class PartitionCell:
    cell_id: int
    band_index: int
    sector_index: int
    polar_range: tuple[float, float]
    azimuth_range: tuple[float, float]

    def diameter_bound(self) -> float:
        """Upper bound on the chord diameter of the cell.

        Any two points can be joined by a meridian arc followed by an arc of a
        parallel; the chord is never longer than that path.
        """
        lo, hi = self.polar_range
        if lo <= math.pi / 2 <= hi:
            widest = 1.0
        else:
            widest = max(math.sin(lo), math.sin(hi))
        width = self.azimuth_range[1] - self.azimuth_range[0]
        path = RADIUS * ((hi - lo) + widest * width)
        return min(path, DIAMETER)

    def contains(self, polar: float, azimuth: float) -> bool:
        """Closed-range membership test."""
        return (
            self.polar_range[0] <= polar <= self.polar_range[1]
            and self.azimuth_range[0] <= azimuth <= self.azimuth_range[1]
        )


def partition_sphere(r: float) -> list[PartitionCell]:
    """Split the sphere into latitude bands cut into azimuthal sectors, each of chord diameter at most ``r``.

    The band height and the sector count of each band are chosen so that both
    the meridian and the parallel legs of :meth:`PartitionCell.diameter_bound`
    are at most ``r/2``. No attempt is made to minimise the number of cells.
    """
    if not r > 0.0:
        raise DomainError(f"partition radius must be positive; got {r!r}")
    if r >= DIAMETER:
        return [PartitionCell(0, 0, 0, (0.0, math.pi), (0.0, 2.0 * math.pi))]

    half = 0.5 * r
    n_bands = math.ceil(math.pi * RADIUS / half)
    band_height = math.pi / n_bands
    cells = []
    for b in range(n_bands):
        lo = b * band_height
        hi = math.pi if b == n_bands - 1 else (b + 1) * band_height
        widest = 1.0 if lo <= math.pi / 2 <= hi else max(math.sin(lo), math.sin(hi))
        n_sectors = max(1, math.ceil(2.0 * math.pi * RADIUS * widest / half))
        width = 2.0 * math.pi / n_sectors
        for s in range(n_sectors):
            a_hi = 2.0 * math.pi if s == n_sectors - 1 else (s + 1) * width
            cells.append(PartitionCell(len(cells), b, s, (lo, hi), (s * width, a_hi)))
    return cells


def _band_table(cells: list[PartitionCell]):
    # band index -> (first cell index, sector count, sector width)
    table = {}
    for cell in cells:
        first, count, _ = table.get(cell.band_index, (cell.cell_id, 0, 0.0))
        table[cell.band_index] = (first, count + 1, cell.azimuth_range[1] - cell.azimuth_range[0])
    return table


def locate_cell(p: SpherePoint, cells: list[PartitionCell]) -> int:
    """Return the id of the cell containing ``p``; boundary points go to the lower id."""
    polar, azimuth = p.angles()
    n_bands = cells[-1].band_index + 1
    band_height = cells[0].polar_range[1] - cells[0].polar_range[0]
    table = _band_table(cells)

    band = min(n_bands - 1, int(polar / band_height))
    if band > 0:
        first, _, _ = table[band - 1]
        if polar <= cells[first].polar_range[1]:
            band -= 1
    first, count, width = table[band]
    if polar <= cells[first].polar_range[0] and band == 0:
        # Pole: every sector of the cap band touches it.
        return first
    sector = min(count - 1, int(azimuth / width))
    if sector > 0 and azimuth <= cells[first + sector - 1].azimuth_range[1]:
        sector -= 1
    return cells[first + sector].cell_id


def points_in_cells(points: np.ndarray, cells: list[PartitionCell]) -> np.ndarray:
    """Vectorised :func:`locate_cell` for an ``(n, 3)`` array of sphere points."""
    polar = np.arccos(np.clip(points[:, 2] / RADIUS, -1.0, 1.0))
    azimuth = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2.0 * math.pi)
    azimuth[azimuth >= 2.0 * math.pi] = 0.0
    n_bands = cells[-1].band_index + 1
    band_height = cells[0].polar_range[1] - cells[0].polar_range[0]
    table = _band_table(cells)
    firsts = np.array([table[b][0] for b in range(n_bands)])
    counts = np.array([table[b][1] for b in range(n_bands)])
    widths = np.array([table[b][2] for b in range(n_bands)])
    upper = np.array([cells[table[b][0]].polar_range[1] for b in range(n_bands)])

    band = np.minimum(n_bands - 1, (polar / band_height).astype(np.int64))
    step_down = (band > 0) & (polar <= upper[np.maximum(band - 1, 0)])
    band = band - step_down
    sector = np.minimum(counts[band] - 1, (azimuth / widths[band]).astype(np.int64))
    sector_upper = (sector) * widths[band]
    step_down = (sector > 0) & (azimuth <= sector_upper)
    sector = sector - step_down
    sector[(band == 0) & (polar == 0.0)] = 0
    return firsts[band] + sector


def sample_in_cell(rng: np.random.Generator, cell: PartitionCell, n: int) -> np.ndarray:
    """Uniform points inside one cell, as an ``(n, 3)`` array."""
    z_hi = math.cos(cell.polar_range[0])
    z_lo = math.cos(cell.polar_range[1])
    cz = rng.uniform(z_lo, z_hi, n)
    az = rng.uniform(cell.azimuth_range[0], cell.azimuth_range[1], n)
    st = np.sqrt(np.clip(1.0 - cz * cz, 0.0, None))
    return RADIUS * np.column_stack((st * np.cos(az), st * np.sin(az), cz))


@dataclass
class PartitionAudit:
    r: float
    n_cells: int
    max_sampled_chord: list
    coverage_counts: np.ndarray

    @property
    def diameter_ok(self) -> bool:
        return all(d <= self.r for d in self.max_sampled_chord)

    @property
    def coverage_ok(self) -> bool:
        return bool(np.all(self.coverage_counts == 1))

    @property
    def passed(self) -> bool:
        return self.diameter_ok and self.coverage_ok


def _half_open_members(cell: PartitionCell, polar: np.ndarray, azimuth: np.ndarray) -> np.ndarray:
    lo, hi = cell.polar_range
    a_lo, a_hi = cell.azimuth_range
    in_polar = (polar >= lo) & ((polar < hi) | (hi == math.pi))
    in_az = (azimuth >= a_lo) & ((azimuth < a_hi) | (a_hi == 2.0 * math.pi))
    return in_polar & in_az


def audit_partition(r: float, rng: np.random.Generator, pairs: int = 1000,
                    coverage_samples: int = 100_000) -> PartitionAudit:
    """Monte Carlo audit of :func:`partition_sphere`.

    Each cell gets ``pairs`` uniform point pairs whose largest chord must not
    exceed ``r``; each of ``coverage_samples`` uniform sphere points must fall
    in exactly one cell (half-open ranges).
    """
    cells = partition_sphere(r)
    chords = []
    for cell in cells:
        a = sample_in_cell(rng, cell, pairs)
        b = sample_in_cell(rng, cell, pairs)
        chords.append(float(np.sqrt(((a - b) ** 2).sum(axis=1)).max()))
    pts = sample_uniform_array(rng, coverage_samples)
    polar = np.arccos(np.clip(pts[:, 2] / RADIUS, -1.0, 1.0))
    azimuth = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * math.pi)
    counts = np.zeros(coverage_samples, dtype=np.int64)
    for cell in cells:
        counts += _half_open_members(cell, polar, azimuth)
    return PartitionAudit(r, len(cells), chords, counts)
