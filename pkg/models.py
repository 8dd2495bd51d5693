"""
Distribution families for the scan.

Each family exposes its mean/variance functions, the closed-form local
likelihood-ratio statistic computed from a region's sufficient statistic
(sum over the region, number of pixels), and global estimators for the
baseline and nuisance parameters.

Parameter conventions (theta0 / xi are tuples):
- gauss-known, gauss-unknown: theta = (mu,),     xi = (sigma2,)
- poisson:                    theta = (lambda,), xi = ()
- gamma:                      theta = (rate,),   xi = (shape,)
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, polygamma, xlogy

from errors import ConfigError, DegenerateData, DomainError


GAUSS_KNOWN = 'gauss-known'
GAUSS_UNKNOWN = 'gauss-unknown'
POISSON = 'poisson'
GAMMA = 'gamma'

MODEL_KINDS = (GAUSS_KNOWN, GAUSS_UNKNOWN, POISSON, GAMMA)

# Gamma shape estimation
GAMMA_TOLERANCE = 1e-10
GAMMA_MAX_ITER = 100


@dataclass(frozen=True)
class ModelFamily:
    kind: str
    theta0: tuple
    xi: tuple = ()
    provenance: str = 'known'  # 'known' or 'estimated'

    def baseline_mean(self):
        return mean_variance(self, self.theta0, self.xi)[0]


@dataclass(frozen=True)
class EstimatorReport:
    theta_hat: tuple
    xi_hat: tuple
    sample_size: int
    method: str  # 'global-mean', 'sample-variance' or 'mle'


def _check_kind(kind):
    if kind not in MODEL_KINDS:
        raise ConfigError(f"Unknown model kind {kind!r}; expected one of {', '.join(MODEL_KINDS)}")


def _check_parameters(kind, theta, xi):
    """Raise DomainError unless (theta, xi) lies in the family's parameter space."""
    values = list(theta) + list(xi)
    if any(not math.isfinite(v) for v in values):
        raise DomainError(f"{kind}: parameters must be finite, got theta={theta}, xi={xi}")

    if kind in (GAUSS_KNOWN, GAUSS_UNKNOWN):
        if len(theta) != 1 or len(xi) != 1:
            raise DomainError(f"{kind} needs theta=(mu,) and xi=(sigma2,)")
        if xi[0] <= 0:
            raise DomainError(f"{kind}: variance must be > 0, got {xi[0]}")
    elif kind == POISSON:
        if len(theta) != 1 or len(xi) != 0:
            raise DomainError("poisson needs theta=(lambda,) and no nuisance parameter")
        if theta[0] < 0:
            raise DomainError(f"poisson: intensity must be >= 0, got {theta[0]}")
    elif kind == GAMMA:
        if len(theta) != 1 or len(xi) != 1:
            raise DomainError("gamma needs theta=(rate,) and xi=(shape,)")
        if theta[0] <= 0 or xi[0] <= 0:
            raise DomainError(f"gamma: rate and shape must be > 0, got rate={theta[0]}, shape={xi[0]}")


def build_model(kind, theta0, xi=(), provenance='known'):
    """
    Create a ModelFamily after checking the parameters against the family's domain.
    Scalars are accepted for theta0 / xi and wrapped into tuples.
    """
    _check_kind(kind)
    theta0 = tuple(float(v) for v in np.atleast_1d(theta0))
    xi = tuple(float(v) for v in np.atleast_1d(xi)) if xi is not None else ()
    _check_parameters(kind, theta0, xi)
    return ModelFamily(kind=kind, theta0=theta0, xi=xi, provenance=provenance)


def mean_variance(model, theta, xi):
    """
    Return (m(theta, xi), v(theta, xi)) for the model's family.
    Gaussian -> (mu, sigma2); Poisson -> (lambda, lambda); Gamma(shape a, rate b) -> (a/b, a/b^2).
    """
    theta = tuple(theta)
    xi = tuple(xi)
    _check_parameters(model.kind, theta, xi)

    if model.kind in (GAUSS_KNOWN, GAUSS_UNKNOWN):
        return float(theta[0]), float(xi[0])
    if model.kind == POISSON:
        return float(theta[0]), float(theta[0])

    rate, shape = theta[0], xi[0]
    return shape / rate, shape / rate ** 2


def _as_sums(model, sum_r, count_r):
    """Validate LRT inputs and return (sums array, count, was_scalar)."""
    scalar = np.ndim(sum_r) == 0
    sums = np.asarray(sum_r, dtype=float)

    if count_r < 1:
        raise DomainError(f"Region size must be >= 1, got {count_r}")
    if np.isnan(sums).any():
        raise DomainError("NaN region sum passed to the local LRT")

    if model.kind == POISSON:
        if (sums < 0).any():
            raise DomainError("poisson: region sums must be >= 0")
        if model.theta0[0] == 0 and (sums > 0).any():
            raise DomainError("poisson: baseline intensity 0 with positive counts gives an infinite LRT")
    elif model.kind == GAMMA:
        if (sums <= 0).any():
            raise DomainError("gamma: region sums must be > 0")

    return sums, int(count_r), scalar


def _squared_lrt(model, sums, count):
    """T_R^2 = 2 log LR for every entry of sums (all regions have `count` pixels)."""
    ybar = sums / count

    if model.kind in (GAUSS_KNOWN, GAUSS_UNKNOWN):
        mu0, sigma2 = model.theta0[0], model.xi[0]
        return count * (ybar - mu0) ** 2 / sigma2

    if model.kind == POISSON:
        lam0 = model.theta0[0]
        if lam0 == 0:
            # only reachable with all-zero sums
            return np.zeros_like(ybar)
        # 0 * log 0 := 0
        squared = 2.0 * count * (lam0 - ybar + xlogy(ybar, ybar / lam0))
        return np.maximum(squared, 0.0)

    # gamma with known shape: LR maximized at rate = shape / ybar
    rate0, shape = model.theta0[0], model.xi[0]
    ratio = ybar * rate0 / shape
    squared = 2.0 * count * shape * (ratio - 1.0 - np.log(ratio))
    return np.maximum(squared, 0.0)


def local_lrt(model, sum_r, count_r):
    """
    Local likelihood-ratio statistic T_R = sqrt(2 log LR) from the pair (sum_R, |R|).

    sum_r may be a scalar or a numpy array of region sums that all share the
    cardinality count_r; the result has the same shape. Always >= 0.
    """
    sums, count, scalar = _as_sums(model, sum_r, count_r)
    values = np.sqrt(_squared_lrt(model, sums, count))
    return float(values) if scalar else values


def taylor_gap(model, sum_r, count_r):
    """
    |T_R^2 - |R| ((ybar - m) / sqrt(v))^2| at the model's baseline parameters.
    Zero for the Gaussian families; small near the baseline for the others.
    """
    sums, count, scalar = _as_sums(model, sum_r, count_r)
    mean, variance = mean_variance(model, model.theta0, model.xi)
    if variance <= 0:
        raise DomainError(f"{model.kind}: baseline variance is 0, standardization undefined")

    ybar = sums / count
    quadratic = count * (ybar - mean) ** 2 / variance
    gap = np.abs(_squared_lrt(model, sums, count) - quadratic)
    return float(gap) if scalar else gap


def _gamma_shape_mle(data):
    """
    Maximum-likelihood shape of a Gamma sample via Newton's method on
    log(a) - digamma(a) = log(mean) - mean(log y).
    """
    s = math.log(data.mean()) - float(np.mean(np.log(data)))
    if s <= 0:
        raise DegenerateData("gamma: constant field, shape estimate is unbounded")

    # Closed-form starting point, accurate to a few percent
    shape = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)

    for _ in range(GAMMA_MAX_ITER):
        value = math.log(shape) - digamma(shape) - s
        slope = 1.0 / shape - polygamma(1, shape)
        step = value / slope
        new_shape = shape - step
        if new_shape <= 0:
            new_shape = shape / 2.0
        if abs(new_shape - shape) <= GAMMA_TOLERANCE * max(1.0, shape):
            return float(new_shape)
        shape = new_shape

    return float(shape)


def estimate_global(model_kind, field, known_theta=None, known_xi=None):
    """
    Estimate baseline and nuisance parameters from the whole field.

    - gauss-known:   mean from the data, variance must be supplied as known_xi
    - gauss-unknown: global mean and unbiased sample variance
    - poisson:       global mean
    - gamma:         maximum likelihood (Newton iterations on the shape)

    Parameters passed as known_theta / known_xi are kept instead of estimated.
    Returns an EstimatorReport.
    """
    _check_kind(model_kind)
    data = np.asarray(field.data if hasattr(field, 'data') else field, dtype=float).ravel()
    size = data.size

    if size == 0:
        raise DomainError("Cannot estimate parameters from an empty field")
    if not np.isfinite(data).all():
        raise DomainError("Field contains non-finite values")

    mean = float(data.mean())

    if model_kind == GAUSS_KNOWN:
        if known_xi is None:
            raise ConfigError("gauss-known needs the variance (nuisance) to be given")
        theta = (mean,) if known_theta is None else tuple(np.atleast_1d(known_theta))
        return EstimatorReport(theta_hat=theta, xi_hat=tuple(np.atleast_1d(known_xi)),
                               sample_size=size, method='global-mean')

    if model_kind == GAUSS_UNKNOWN:
        if size < 2:
            raise DomainError("Sample variance needs at least 2 entries")
        variance = float(data.var(ddof=1))
        if variance == 0:
            raise DegenerateData("Constant field: sample variance is 0")
        theta = (mean,) if known_theta is None else tuple(np.atleast_1d(known_theta))
        xi = (variance,) if known_xi is None else tuple(np.atleast_1d(known_xi))
        return EstimatorReport(theta_hat=theta, xi_hat=xi, sample_size=size, method='sample-variance')

    if model_kind == POISSON:
        if known_theta is not None:
            theta = tuple(np.atleast_1d(known_theta))
        else:
            if mean == 0:
                raise DegenerateData("poisson: field has no counts, estimated intensity is 0")
            theta = (mean,)
        return EstimatorReport(theta_hat=theta, xi_hat=(), sample_size=size, method='global-mean')

    # gamma
    if (data <= 0).any():
        raise DomainError("gamma: all observations must be > 0")
    if known_xi is not None:
        shape = float(np.atleast_1d(known_xi)[0])
    else:
        if size < 2:
            raise DomainError("Gamma shape estimation needs at least 2 entries")
        shape = _gamma_shape_mle(data)
    rate = shape / mean if known_theta is None else float(np.atleast_1d(known_theta)[0])
    return EstimatorReport(theta_hat=(rate,), xi_hat=(shape,), sample_size=size, method='mle')


def model_from_estimates(model_kind, report):
    """Turn an EstimatorReport into a ModelFamily marked as estimated."""
    return build_model(model_kind, report.theta_hat, report.xi_hat, provenance='estimated')
