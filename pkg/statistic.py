"""
Calibrated multiscale statistics.

scan_statistic computes T_n = max_R omega_tilde(|R|) * (T_R - omega(|R|)) from the
local LRTs of a data field. surrogate_statistic computes the same maximum for
standardized sums of a standard-normal field (M_n), whose distribution is
simulated to obtain thresholds. Both come in a two-sided and a one-sided
(upper alternatives only) variant.
"""

import math
from dataclasses import dataclass

import numpy as np

from calibration import omega, omega_tilde
from errors import ConfigError, DomainError, EmptySystem
from localmeans import fft_scale_sums, naive_scale_sums
from models import local_lrt
from regions import Region


TWO_SIDED = 'two-sided'
ONE_SIDED = 'one-sided'

SIDEDNESS = (TWO_SIDED, ONE_SIDED)


@dataclass(frozen=True)
class ScaleStatistics:
    scale: tuple
    cardinality: int
    local: np.ndarray  # T_R, or the gated one-sided value
    calibrated: np.ndarray  # omega_tilde * (local - omega)
    omega: float
    omega_tilde: float
    elevated: np.ndarray = None  # one-sided gate, None for two-sided scans


@dataclass(frozen=True)
class ScanResult:
    t_n: float
    per_scale: tuple  # ScaleStatistics, empty when regions were not kept
    argmax_region: Region
    argmax_local: float
    sidedness: str
    model: object
    calibration: object
    system: object


@dataclass(frozen=True)
class Rejection:
    region: Region
    local_stat: float
    calibrated: float
    threshold: float  # c_|R|(eta) = eta / omega_tilde + omega


def _check_sidedness(sidedness):
    if sidedness not in SIDEDNESS:
        raise ConfigError(f"Unknown sidedness {sidedness!r}; expected one of {', '.join(SIDEDNESS)}")


def scan_from_sums(scale_sums, system, model, cal, sidedness=TWO_SIDED, keep_regions=True):
    """
    Assemble T_n from precomputed region sums.
    Lets callers reuse one set of sums for several models (e.g. oracle and
    estimated parameters on the same replicate).
    """
    _check_sidedness(sidedness)
    if not scale_sums:
        raise EmptySystem("Region system has no scales to scan")

    baseline = model.baseline_mean()
    best = -math.inf
    best_region = None
    best_local = 0.0
    kept = []

    for entry in scale_sums:
        local = local_lrt(model, entry.sums, entry.cardinality)
        elevated = None
        if sidedness == ONE_SIDED:
            # strict: a region exactly at the baseline does not count as elevated
            elevated = entry.sums / entry.cardinality > baseline
            local = np.where(elevated, local, 0.0)

        w = omega(cal, entry.cardinality, system.n)
        w_tilde = omega_tilde(cal, entry.cardinality, system.n)
        calibrated = w_tilde * (local - w)

        # first maximum in row-major order; strict > keeps the earliest scale on ties
        index = int(np.argmax(calibrated))
        value = float(calibrated.flat[index])
        if value > best:
            best = value
            offset = tuple(int(i) for i in np.unravel_index(index, calibrated.shape))
            best_region = Region(offset=offset, extent=tuple(entry.scale))
            best_local = float(local.flat[index])

        if keep_regions:
            kept.append(ScaleStatistics(
                scale=tuple(entry.scale),
                cardinality=entry.cardinality,
                local=local,
                calibrated=calibrated,
                omega=w,
                omega_tilde=w_tilde,
                elevated=elevated,
            ))

    return ScanResult(
        t_n=best,
        per_scale=tuple(kept),
        argmax_region=best_region,
        argmax_local=best_local,
        sidedness=sidedness,
        model=model,
        calibration=cal,
        system=system,
    )


def scan_statistic(field, system, model, cal, sidedness=TWO_SIDED, keep_regions=True,
                   engine='fft', workers=None):
    """
    Calibrated multiscale statistic of a data field under a fixed model.

    engine='fft' computes region sums by FFT convolution; engine='naive' uses
    direct summation (slow, for cross-checks). Per-region arrays are kept only
    when keep_regions is true; they are needed by reject_regions.
    """
    if not system.scales:
        raise EmptySystem("Region system has no scales to scan")
    if any(not math.isfinite(v) for v in model.theta0 + model.xi):
        raise DomainError("Model parameters must be finite")

    if engine == 'fft':
        sums = fft_scale_sums(field, system, workers=workers)
    elif engine == 'naive':
        sums = naive_scale_sums(field, system)
    else:
        raise ConfigError(f"Unknown summation engine {engine!r}")

    return scan_from_sums(sums, system, model, cal, sidedness=sidedness, keep_regions=keep_regions)


def surrogate_from_sums(scale_sums, system, cal, sidedness=TWO_SIDED):
    """
    M_n from precomputed sums of a standard-normal field.
    One-sided: only regions with a positive sum take part; returns -inf when none does.
    """
    _check_sidedness(sidedness)
    if not scale_sums:
        raise EmptySystem("Region system has no scales to scan")

    best = -math.inf
    for entry in scale_sums:
        standardized = entry.sums / math.sqrt(entry.cardinality)
        if sidedness == ONE_SIDED:
            positive = standardized[entry.sums > 0]
            if positive.size == 0:
                continue
            top = float(positive.max())
        else:
            top = float(np.abs(standardized).max())

        # omega_tilde >= 0, so the max over regions of one scale is taken on the raw values
        w = omega(cal, entry.cardinality, system.n)
        w_tilde = omega_tilde(cal, entry.cardinality, system.n)
        best = max(best, w_tilde * (top - w))

    return best


def surrogate_statistic(noise, system, cal, sidedness=TWO_SIDED, workers=None):
    """Gaussian surrogate M_n of a field of i.i.d. standard normals."""
    if not system.scales:
        raise EmptySystem("Region system has no scales to scan")
    sums = fft_scale_sums(noise, system, workers=workers)
    return surrogate_from_sums(sums, system, cal, sidedness=sidedness)


def reject_regions(result, eta):
    """
    Every region whose calibrated value reaches eta, i.e. T_R >= eta / omega_tilde + omega.
    One-sided scans never reject a region at or below the baseline. Regions are
    listed in scan order. Needs a ScanResult computed with keep_regions=True.
    """
    if math.isnan(eta):
        raise DomainError("Threshold eta must not be NaN")
    if not result.per_scale:
        raise ConfigError("Scan result holds no per-region statistics (run with keep_regions=True)")

    rejections = []
    for stats in result.per_scale:
        if stats.omega_tilde > 0:
            threshold = eta / stats.omega_tilde + stats.omega
        else:
            threshold = math.inf
        passed = stats.calibrated >= eta
        if stats.elevated is not None:
            passed &= stats.elevated
        for index in np.argwhere(passed):
            offset = tuple(int(i) for i in index)
            rejections.append(Rejection(
                region=Region(offset=offset, extent=stats.scale),
                local_stat=float(stats.local[offset]),
                calibrated=float(stats.calibrated[offset]),
                threshold=threshold,
            ))
    return rejections
