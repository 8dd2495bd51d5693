"""
Local sums over every region of every scale.

The field is transformed once; each scale then costs one kernel transform
(cached), one product and one inverse transform. Because all kept offsets
satisfy t_i + h_i <= n, a transform length L >= n per axis already avoids
wrap-around on the kept entries, so padding only goes up to the next fast
FFT length.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft

from errors import DomainError, NegativeCount, ShapeError, SizeError
from regions import enumerate_offsets


COUNTS = 'counts'
REALS = 'reals'


@dataclass(frozen=True)
class Field:
    data: np.ndarray
    n: int
    d: int
    dtype: str = REALS


@dataclass(frozen=True)
class ScaleSums:
    scale: tuple
    sums: np.ndarray
    cardinality: int


@dataclass(frozen=True)
class FieldSpectrum:
    spectrum: np.ndarray
    padded_shape: tuple
    n: int
    d: int
    dtype: str


def make_field(data, dtype=REALS):
    """
    Wrap an n x ... x n array as a Field after checking its invariants.
    Count fields must hold nonnegative integers; every entry must be finite.
    """
    array = np.asarray(data, dtype=float)
    if array.ndim == 0 or array.size == 0:
        raise ShapeError("A field needs at least one axis and one entry")
    if len(set(array.shape)) != 1:
        raise ShapeError(f"Fields must have equal side lengths, got shape {array.shape}")
    if not np.isfinite(array).all():
        raise DomainError("Field contains NaN or infinite values")
    if dtype not in (COUNTS, REALS):
        raise ShapeError(f"Unknown field dtype {dtype!r}")
    if dtype == COUNTS:
        if (array < 0).any():
            raise NegativeCount("Count field contains negative values")
        if not np.array_equal(array, np.round(array)):
            raise NegativeCount("Count field contains non-integer values")

    array = np.ascontiguousarray(array)
    array.flags.writeable = False
    return Field(data=array, n=array.shape[0], d=array.ndim, dtype=dtype)


def _check_sizes(field, system):
    if (field.n, field.d) != (system.n, system.d):
        raise SizeError(
            f"Field is {field.n}^{field.d} but the region system expects {system.n}^{system.d}"
        )


def field_spectrum(field, workers=None):
    """Forward real FFT of the field, computed once and shared by all scales."""
    padded = tuple(fft.next_fast_len(field.n, real=True) for _ in range(field.d))
    spectrum = fft.rfftn(field.data, s=padded, workers=workers)
    spectrum.flags.writeable = False
    return FieldSpectrum(spectrum=spectrum, padded_shape=padded, n=field.n, d=field.d, dtype=field.dtype)


@lru_cache(maxsize=512)
def kernel_spectrum(padded_shape, scale):
    """FFT of the box indicator of extent `scale`, anchored at the origin."""
    kernel = np.zeros(padded_shape)
    kernel[tuple(slice(0, h) for h in scale)] = 1.0
    spectrum = fft.rfftn(kernel)
    spectrum.flags.writeable = False
    return spectrum


def sums_for_scale(spectrum, scale, workers=None):
    """
    Region sums for one scale from a precomputed field spectrum.
    Entry t of the result is the sum over [t, t + h); count fields are rounded.
    """
    scale = tuple(int(h) for h in scale)
    product = spectrum.spectrum * kernel_spectrum(spectrum.padded_shape, scale)
    full = fft.irfftn(product, s=spectrum.padded_shape, workers=workers)

    # convolution index t + h - 1 holds the sum starting at offset t
    valid = tuple(slice(h - 1, spectrum.n) for h in scale)
    sums = full[valid]
    if spectrum.dtype == COUNTS:
        sums = np.rint(sums)
        sums[sums < 0] = 0.0
    return ScaleSums(scale=scale, sums=np.ascontiguousarray(sums), cardinality=int(np.prod(scale)))


def fft_scale_sums(field, system, workers=None):
    """All region sums of the system, one ScaleSums per scale, via FFT convolution."""
    _check_sizes(field, system)
    spectrum = field_spectrum(field, workers=workers)
    return [sums_for_scale(spectrum, scale, workers=workers) for scale in system.scales]


def naive_scale_sums(field, system):
    """
    Reference implementation by direct summation over every region.
    Exact for integer fields; meant for small grids (n <= 64) in tests.
    """
    _check_sizes(field, system)
    results = []
    for scale in system.scales:
        _, offsets = enumerate_offsets(system, scale)
        shape = tuple(system.n - h + 1 for h in scale)
        sums = np.empty(shape)
        for offset in offsets:
            window = tuple(slice(t, t + h) for t, h in zip(offset, scale))
            sums[offset] = field.data[window].sum()
        results.append(ScaleSums(scale=tuple(scale), sums=sums, cardinality=int(np.prod(scale))))
    return results
