"""
Scale calibrations (omega_tilde, omega).

The calibrated local value of a region with cardinality r is
    omega_tilde(r, n) * (T_R - omega(r, n)),
so omega is an additive penalty and omega_tilde a multiplicative weight.
Shipped kinds:
- dw:   omega_tilde = 1, omega = sqrt(2 nu log(n^d / r) + 1)
- sac:  omega_tilde = sqrt(2 log(n^d / r)), omega = that plus a log correction
- pwm:  omega = omega_tilde = sqrt(2 log(C n^d / r)) + C_d log(...) / sqrt(...)
- unit: omega_tilde = 1, omega = a constant offset (0 gives the uncalibrated scan)
All logarithms are natural.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from errors import ConfigError, DomainError


CALIBRATION_KINDS = ('dw', 'sac', 'pwm', 'unit')

# (alpha, alpha_tilde, beta, beta_tilde) growth exponents per kind
GROWTH_EXPONENTS = {
    'dw': (0.5, 0.0, -0.5, 0.0),
    'sac': (0.5, 0.5, -0.5, -0.5),
    'pwm': (0.5, 0.5, -0.5, -0.5),
    'unit': (0.0, 0.0, 0.0, 0.0),
}

GROWTH_SAMPLES = 2000


@dataclass(frozen=True)
class Calibration:
    kind: str = 'dw'
    d: int = 2
    nu: float = 1.0
    pwm_c: float = 2.0
    pwm_cd: float = 1.0
    unit_offset: float = 0.0

    @property
    def growth_exponents(self):
        alpha, alpha_tilde, beta, beta_tilde = GROWTH_EXPONENTS[self.kind]
        return {'alpha': alpha, 'alpha_tilde': alpha_tilde, 'beta': beta, 'beta_tilde': beta_tilde}

    def describe(self):
        """Only the parameters that matter for this kind (used for digests and reports)."""
        params = {'kind': self.kind, 'd': self.d}
        if self.kind == 'dw':
            params['nu'] = self.nu
        elif self.kind == 'pwm':
            params['pwm_c'] = self.pwm_c
            params['pwm_cd'] = self.pwm_cd
        elif self.kind == 'unit':
            params['unit_offset'] = self.unit_offset
        return params


@dataclass(frozen=True)
class GrowthValidation:
    passed: bool
    monotone: bool
    c_omega: float
    c_omega_tilde: float
    exponents: dict
    notes: tuple


@dataclass(frozen=True)
class ScaleGuard:
    gamma: float
    threshold: float  # log(n)^gamma
    r_n: float
    warn: bool
    message: str


def build_calibration(kind, d, nu=1.0, pwm_c=2.0, pwm_cd=1.0, unit_offset=0.0):
    """Create a Calibration after checking the parameters for its kind."""
    if kind not in CALIBRATION_KINDS:
        raise ConfigError(f"Unknown calibration {kind!r}; expected one of {', '.join(CALIBRATION_KINDS)}")
    if d < 1:
        raise ConfigError(f"Dimension must be >= 1, got {d}")
    if kind == 'dw' and nu < 1:
        raise ConfigError(f"dw calibration needs nu >= 1, got {nu}")
    if kind == 'pwm' and pwm_c <= 1:
        raise ConfigError(f"pwm calibration needs C > 1, got {pwm_c}")
    if kind == 'unit' and unit_offset < 0:
        raise ConfigError(f"unit calibration needs a nonnegative offset, got {unit_offset}")
    return Calibration(kind=kind, d=int(d), nu=float(nu), pwm_c=float(pwm_c),
                       pwm_cd=float(pwm_cd), unit_offset=float(unit_offset))


def calibration_digest(cal):
    """Stable text key for a calibration (kind and relevant parameters)."""
    return json.dumps(cal.describe(), sort_keys=True)


def _log_ratio(r, n, d, factor=1.0):
    """log(factor * n^d / r) with domain checks on r."""
    r = np.asarray(r, dtype=float)
    if (r < 1).any():
        raise DomainError("Scale must be >= 1")
    if (r > float(n) ** d).any():
        raise DomainError(f"Scale exceeds the grid size n^d = {n ** d}")
    return np.log(factor * float(n) ** d / r)


def _finish(values, r):
    return float(values) if np.ndim(r) == 0 else values


def omega(cal, r, n):
    """Additive scale penalty omega(r, n); r may be a scalar or an array."""
    if cal.kind == 'dw':
        log_ratio = _log_ratio(r, n, cal.d)
        return _finish(np.sqrt(2.0 * cal.nu * log_ratio + 1.0), r)

    if cal.kind == 'sac':
        log_ratio = _log_ratio(r, n, cal.d)
        if (log_ratio <= 0).any():
            raise DomainError("sac calibration is undefined at r = n^d; restrict the largest scale")
        root = np.sqrt(2.0 * log_ratio)
        correction = ((4 * cal.d - 1) * np.log(root) - math.log(math.sqrt(2.0 * math.pi))) / root
        return _finish(root + correction, r)

    if cal.kind == 'pwm':
        log_ratio = _log_ratio(r, n, cal.d, factor=cal.pwm_c)
        root = np.sqrt(2.0 * log_ratio)
        return _finish(root + cal.pwm_cd * np.log(root) / root, r)

    # unit
    _log_ratio(r, n, cal.d)
    return _finish(np.full(np.shape(r), cal.unit_offset), r)


def omega_tilde(cal, r, n):
    """Multiplicative scale weight omega_tilde(r, n); r may be a scalar or an array."""
    if cal.kind == 'sac':
        log_ratio = _log_ratio(r, n, cal.d)
        return _finish(np.sqrt(2.0 * np.maximum(log_ratio, 0.0)), r)

    if cal.kind == 'pwm':
        return omega(cal, r, n)

    # dw, unit
    _log_ratio(r, n, cal.d)
    return _finish(np.ones(np.shape(r)), r)


def _fit_constant(values, log_ratio, exponent):
    """Smallest C with values <= C * log_ratio^exponent on the samples."""
    envelope = np.power(log_ratio, exponent)
    return float(np.max(np.abs(values) / envelope))


def validate_growth(cal, n, samples=GROWTH_SAMPLES):
    """
    Check monotonicity and growth bounds of the calibration on a sample of
    scales r in [1, n^d / 2].

    Fits C_omega for omega(r) <= C log^alpha(n^d/r) and the matching bound for
    omega_tilde, plus the derivative bounds |omega'(r)| <= C log^beta(n^d/r) / r,
    using the exponents recorded for the calibration kind.
    """
    exponents = cal.growth_exponents
    upper = max(float(n) ** cal.d / 2.0, 1.0)
    r = np.unique(np.geomspace(1.0, upper, samples))
    if r.size < 2:
        raise ConfigError(f"Grid too small to sample scales (n={n}, d={cal.d})")
    log_ratio = np.log(float(n) ** cal.d / r)
    notes = []

    values = np.asarray(omega(cal, r, n), dtype=float)
    tilde = np.asarray(omega_tilde(cal, r, n), dtype=float)

    monotone = bool(np.all(np.diff(values) <= 1e-12) and np.all(np.diff(tilde) <= 1e-12))
    if not monotone:
        notes.append('omega or omega_tilde increases with the scale')

    if (values < 0).any() or (tilde <= 0).any():
        notes.append('calibration takes nonpositive values')

    c_omega = _fit_constant(values, log_ratio, exponents['alpha'])
    c_tilde = _fit_constant(tilde, log_ratio, exponents['alpha_tilde'])

    # derivative bounds via finite differences on the sampled grid
    mid_r = np.sqrt(r[1:] * r[:-1])
    mid_log = np.log(float(n) ** cal.d / mid_r)
    slope = np.diff(values) / np.diff(r)
    slope_tilde = np.diff(tilde) / np.diff(r)
    c_slope = _fit_constant(slope * mid_r, mid_log, exponents['beta'])
    c_slope_tilde = _fit_constant(slope_tilde * mid_r, mid_log, exponents['beta_tilde'])

    constants = [c_omega, c_tilde, c_slope, c_slope_tilde]
    bounded = all(math.isfinite(c) for c in constants)
    if not bounded:
        notes.append('growth bound constant is not finite')

    passed = monotone and bounded and not (values < 0).any() and not (tilde <= 0).any()
    return GrowthValidation(
        passed=passed,
        monotone=monotone,
        c_omega=max(c_omega, c_slope),
        c_omega_tilde=max(c_tilde, c_slope_tilde),
        exponents=exponents,
        notes=tuple(notes),
    )


def gamma_exponent(cal):
    """gamma = 12 + 6 alpha_tilde + 2 max(1/2, alpha, alpha_tilde) + 2 max(beta, beta_tilde, 0)."""
    e = cal.growth_exponents
    return (12.0 + 6.0 * e['alpha_tilde'] + 2.0 * max(0.5, e['alpha'], e['alpha_tilde'])
            + 2.0 * max(e['beta'], e['beta_tilde'], 0.0))


def min_scale_guard(cal, n, r_n):
    """
    Advisory check of the smallest scale against log(n)^gamma.
    The condition is asymptotic, so a failure only produces a warning.
    """
    gamma = gamma_exponent(cal)
    threshold = math.log(n) ** gamma if n > 1 else 0.0
    largest = float(n) ** cal.d
    warn = r_n < threshold and r_n < largest
    if warn:
        message = (f"smallest scale r_n={r_n} is below log(n)^gamma = {threshold:.3g} "
                   f"(gamma={gamma:g}); estimated-parameter calibration is only asymptotic here")
    else:
        message = f"smallest scale r_n={r_n} satisfies r_n >= log(n)^gamma (gamma={gamma:g})"
    return ScaleGuard(gamma=gamma, threshold=threshold, r_n=r_n, warn=warn, message=message)

