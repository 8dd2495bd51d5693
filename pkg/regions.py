"""
Candidate region systems.

A system is a list of distinct scales (side-length vectors h). Every scale is
placed at every offset t with t_i + h_i <= n, giving axis-aligned hyperrectangles
inside the grid {0..n-1}^d. Offsets are 0-based here and 1-based in exported files.
"""

import csv
import itertools
import math
from dataclasses import dataclass, replace

from errors import ConfigError, EmptySystem


PARITIES = ('all', 'even')

# Only rectangles are built; other base shapes would plug in through this name.
RECTANGLE = 'rectangle'


@dataclass(frozen=True)
class Region:
    offset: tuple
    extent: tuple

    @property
    def cardinality(self):
        return math.prod(self.extent)

    def slices(self):
        """Index slices selecting this region from an n^d array."""
        return tuple(slice(t, t + h) for t, h in zip(self.offset, self.extent))


@dataclass(frozen=True)
class RegionSystem:
    n: int
    d: int
    scales: tuple
    scale_bounds: tuple
    parity: str = 'all'
    shape: str = RECTANGLE

    def cardinalities(self):
        return [math.prod(h) for h in self.scales]

    def __len__(self):
        return len(self.scales)


@dataclass(frozen=True)
class GrowthReport:
    total_regions: int
    n_scales: int
    log_ratio: float  # log(#regions) / log(n)
    envelope: int  # n^(2d+1)
    exceeded: bool


def build_rectangles(n, d, min_side, max_side, parity='all'):
    """
    Build the system of all rectangles whose sides lie in [min_side, max_side].

    With parity='even' only even side lengths are used. Scale bounds default
    to (min_side^d, max_side^d); use restrict() to narrow them.
    """
    if n < 1 or d < 1:
        raise ConfigError(f"Grid size and dimension must be >= 1, got n={n}, d={d}")
    if not 1 <= min_side <= max_side <= n:
        raise ConfigError(
            f"Side lengths must satisfy 1 <= min_side <= max_side <= n, "
            f"got {min_side}..{max_side} with n={n}"
        )
    if parity not in PARITIES:
        raise ConfigError(f"Unknown parity filter {parity!r}; expected one of {', '.join(PARITIES)}")

    sides = [s for s in range(min_side, max_side + 1) if parity == 'all' or s % 2 == 0]
    if not sides:
        raise EmptySystem(f"No {parity} side length between {min_side} and {max_side}")

    scales = tuple(itertools.product(sides, repeat=d))
    return RegionSystem(
        n=n,
        d=d,
        scales=scales,
        scale_bounds=(min_side ** d, max_side ** d),
        parity=parity,
    )


def restrict(system, r_n, m_n):
    """
    Keep only scales whose cardinality lies in [r_n, m_n].
    The stored bounds become the intersection of old and new bounds, so
    restricting twice with the same bounds changes nothing.
    """
    if r_n > m_n:
        raise ConfigError(f"Scale restriction needs r_n <= m_n, got [{r_n}, {m_n}]")

    kept = tuple(h for h in system.scales if r_n <= math.prod(h) <= m_n)
    if not kept:
        raise EmptySystem(f"No scale with cardinality in [{r_n}, {m_n}]")

    low, high = system.scale_bounds
    return replace(system, scales=kept, scale_bounds=(max(low, r_n), min(high, m_n)))


def offset_count(n, scale):
    """Number of placements of a scale inside the grid: prod(n - h_i + 1)."""
    return math.prod(n - h + 1 for h in scale)


def enumerate_offsets(system, scale):
    """
    Return (count, iterator) over the valid 0-based offsets of a scale.
    Offsets come in row-major order (last axis fastest).
    """
    scale = tuple(scale)
    if scale not in system.scales:
        raise ConfigError(f"Scale {scale} is not part of the region system")

    ranges = [range(system.n - h + 1) for h in scale]
    return offset_count(system.n, scale), itertools.product(*ranges)


def iter_regions(system):
    """Yield every Region in scan order: scale by scale, offsets row-major."""
    for scale in system.scales:
        _, offsets = enumerate_offsets(system, scale)
        for offset in offsets:
            yield Region(offset=tuple(offset), extent=tuple(scale))


def check_growth(system):
    """
    Count the regions and compare against the polynomial envelope n^(2d+1),
    which bounds the number of hyperrectangles in {0..n-1}^d.
    """
    total = sum(offset_count(system.n, h) for h in system.scales)
    envelope = system.n ** (2 * system.d + 1)
    log_ratio = math.log(total) / math.log(system.n) if system.n > 1 else 0.0
    return GrowthReport(
        total_regions=total,
        n_scales=len(system.scales),
        log_ratio=log_ratio,
        envelope=envelope,
        exceeded=total > envelope,
    )


def region_header(d):
    """CSV column names for a region: t_1..t_d, h_1..h_d, cardinality."""
    return [f"t_{i + 1}" for i in range(d)] + [f"h_{i + 1}" for i in range(d)] + ['cardinality']


def region_row(region):
    """CSV row for a region; offsets are written 1-based."""
    return [t + 1 for t in region.offset] + list(region.extent) + [region.cardinality]


def write_region_list(system, path):
    """Write every region of the system as CSV, one row per region."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(region_header(system.d))
        count = 0
        for region in iter_regions(system):
            writer.writerow(region_row(region))
            count += 1
    return count
