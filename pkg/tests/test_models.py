"""Tests for distribution families, local LRTs and global estimators."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from errors import ConfigError, DegenerateData, DomainError
from localmeans import COUNTS, REALS, make_field
from models import (GAMMA, GAUSS_KNOWN, GAUSS_UNKNOWN, POISSON, build_model, estimate_global,
                    local_lrt, mean_variance, model_from_estimates, taylor_gap)


# ------------------------------------------------------------------ #
# mean_variance / build_model
# ------------------------------------------------------------------ #


class TestMeanVariance:
    def test_poisson(self):
        model = build_model(POISSON, 1.0)
        assert mean_variance(model, (1.0,), ()) == (1.0, 1.0)

    def test_gamma(self):
        model = build_model(GAMMA, 4.0, 2.0)
        mean, variance = mean_variance(model, (4.0,), (2.0,))
        assert mean == pytest.approx(0.5)
        assert variance == pytest.approx(0.125)

    def test_gaussian(self):
        model = build_model(GAUSS_KNOWN, 0.0, 1.0)
        assert mean_variance(model, (0.0,), (1.0,)) == (0.0, 1.0)

    def test_baseline_mean(self):
        assert build_model(GAMMA, 4.0, 2.0).baseline_mean() == pytest.approx(0.5)


class TestBuildModel:
    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="Unknown model kind"):
            build_model('weibull', 1.0)

    def test_negative_variance(self):
        with pytest.raises(DomainError, match="variance"):
            build_model(GAUSS_KNOWN, 0.0, -1.0)

    def test_negative_intensity(self):
        with pytest.raises(DomainError):
            build_model(POISSON, -0.5)

    def test_poisson_takes_no_nuisance(self):
        with pytest.raises(DomainError):
            build_model(POISSON, 1.0, 2.0)

    def test_non_finite(self):
        with pytest.raises(DomainError, match="finite"):
            build_model(GAMMA, math.inf, 1.0)

    def test_scalars_become_tuples(self):
        model = build_model(GAUSS_UNKNOWN, 1, 2)
        assert model.theta0 == (1.0,)
        assert model.xi == (2.0,)
        assert model.provenance == 'known'


# ------------------------------------------------------------------ #
# local_lrt closed forms
# ------------------------------------------------------------------ #


class TestLocalLrt:
    def test_poisson_at_baseline(self):
        assert local_lrt(build_model(POISSON, 1.0), 4, 4) == 0.0

    def test_poisson_elevated(self):
        value = local_lrt(build_model(POISSON, 1.0), 8, 4)
        assert value == pytest.approx(math.sqrt(2 * (4 - 8 + 8 * math.log(2))))
        assert value == pytest.approx(1.7580, abs=1e-4)

    def test_poisson_zero_counts(self):
        # 0 log 0 = 0, so T^2 = 2 |R| lambda0
        value = local_lrt(build_model(POISSON, 1.5), 0, 10)
        assert value == pytest.approx(math.sqrt(2 * 10 * 1.5))

    def test_gaussian(self):
        assert local_lrt(build_model(GAUSS_KNOWN, 0.0, 1.0), 6, 4) == pytest.approx(3.0)

    def test_gamma_at_baseline(self):
        # mean shape/rate = 0.5 per pixel
        assert local_lrt(build_model(GAMMA, 4.0, 2.0), 5.0, 10) == pytest.approx(0.0, abs=1e-12)

    def test_vectorized_matches_scalar(self, rng):
        model = build_model(POISSON, 2.0)
        sums = rng.poisson(8.0, size=(5, 7)).astype(float)
        values = local_lrt(model, sums, 4)
        assert values.shape == sums.shape
        for s, v in zip(sums.ravel(), values.ravel()):
            assert v == pytest.approx(local_lrt(model, s, 4))

    def test_nonnegative(self, rng):
        model = build_model(GAMMA, 1.0, 3.0)
        values = local_lrt(model, rng.gamma(3.0, 1.0, size=200) * 5, 5)
        assert (values >= 0).all()

    @pytest.mark.parametrize('model', [
        build_model(GAUSS_KNOWN, 1.0, 2.0),
        build_model(GAUSS_UNKNOWN, -0.5, 0.5),
        build_model(POISSON, 1.5),
        build_model(GAMMA, 4.0, 2.0),
    ], ids=lambda model: model.kind)
    def test_increases_with_distance_from_baseline(self, model):
        m = model.baseline_mean()
        count = 9
        distances = np.linspace(0.01, 0.95, 60) * (abs(m) if m != 0 else 1.0)
        for side in (1.0, -1.0):
            ybar = m + side * distances
            values = local_lrt(model, count * ybar, count)
            assert (np.diff(values) > 0).all()

    def test_count_must_be_positive(self):
        with pytest.raises(DomainError, match="Region size"):
            local_lrt(build_model(POISSON, 1.0), 3, 0)

    def test_poisson_negative_sum(self):
        with pytest.raises(DomainError):
            local_lrt(build_model(POISSON, 1.0), -1, 4)

    def test_poisson_zero_baseline_with_counts(self):
        with pytest.raises(DomainError, match="infinite"):
            local_lrt(build_model(POISSON, 0.0), 3, 4)

    def test_poisson_zero_baseline_without_counts(self):
        assert local_lrt(build_model(POISSON, 0.0), 0, 4) == 0.0

    def test_gamma_needs_positive_sums(self):
        with pytest.raises(DomainError):
            local_lrt(build_model(GAMMA, 1.0, 1.0), 0.0, 4)

    def test_nan_sum(self):
        with pytest.raises(DomainError, match="NaN"):
            local_lrt(build_model(GAUSS_KNOWN, 0.0, 1.0), float('nan'), 4)


# ------------------------------------------------------------------ #
# Closed forms against numerical maximization of the likelihood
# ------------------------------------------------------------------ #


def _numeric_squared_lrt(loglik, theta0, bounds):
    """2 (max log-likelihood - log-likelihood at theta0) by bounded scalar search."""
    result = minimize_scalar(lambda t: -loglik(t), bounds=bounds, method='bounded',
                             options={'xatol': 1e-12, 'maxiter': 2000})
    return 2.0 * (max(-result.fun, loglik(theta0)) - loglik(theta0))


class TestLrtOracle:
    TUPLES = 1000

    def test_gaussian(self, rng):
        for _ in range(self.TUPLES):
            mu0, sigma2 = rng.uniform(-3, 3), rng.uniform(0.2, 4)
            count = int(rng.integers(1, 400))
            ybar = mu0 + rng.normal(0, 3 * math.sqrt(sigma2 / count))
            model = build_model(GAUSS_KNOWN, mu0, sigma2)

            def loglik(mu):
                return -count * (ybar - mu) ** 2 / (2 * sigma2)

            expected = _numeric_squared_lrt(loglik, mu0, (mu0 - 50, mu0 + 50))
            assert local_lrt(model, ybar * count, count) ** 2 == pytest.approx(expected, rel=1e-8, abs=1e-9)

    def test_poisson(self, rng):
        for _ in range(self.TUPLES):
            lam0 = rng.uniform(0.2, 5)
            count = int(rng.integers(1, 400))
            total = max(1, int(rng.poisson(count * lam0 * rng.uniform(0.5, 2))))
            model = build_model(POISSON, lam0)

            def loglik(lam):
                return total * math.log(lam) - count * lam

            upper = 100 * (total / count + lam0)
            expected = _numeric_squared_lrt(loglik, lam0, (1e-9, upper))
            assert local_lrt(model, total, count) ** 2 == pytest.approx(expected, rel=1e-8, abs=1e-9)

    def test_gamma(self, rng):
        for _ in range(self.TUPLES):
            rate0, shape = rng.uniform(0.3, 4), rng.uniform(0.5, 6)
            count = int(rng.integers(1, 400))
            total = rng.gamma(shape * count, 1 / (rate0 * rng.uniform(0.5, 2)))
            model = build_model(GAMMA, rate0, shape)

            def loglik(rate):
                return count * shape * math.log(rate) - rate * total

            upper = 100 * (shape * count / total + rate0)
            expected = _numeric_squared_lrt(loglik, rate0, (1e-9, upper))
            assert local_lrt(model, total, count) ** 2 == pytest.approx(expected, rel=1e-8, abs=1e-9)


# ------------------------------------------------------------------ #
# taylor_gap
# ------------------------------------------------------------------ #


class TestTaylorGap:
    def test_gaussian_is_exact(self, rng):
        model = build_model(GAUSS_UNKNOWN, 1.0, 2.0)
        gaps = taylor_gap(model, rng.normal(0, 10, size=50), 9)
        assert np.allclose(gaps, 0.0, atol=1e-10)

    def test_poisson_at_baseline(self):
        assert taylor_gap(build_model(POISSON, 1.0), 4, 4) == pytest.approx(0.0, abs=1e-12)

    def test_poisson_off_baseline(self):
        expected = abs(8 * (-1 + 2 * math.log(2)) - 4)
        assert taylor_gap(build_model(POISSON, 1.0), 8, 4) == pytest.approx(expected)
        assert expected == pytest.approx(0.9096, abs=1e-4)

    @pytest.mark.parametrize('lam0', [0.5, 1.0, 4.0])
    def test_poisson_cubic_bound(self, lam0):
        model = build_model(POISSON, lam0)
        ybar = lam0 * np.linspace(0.5, 2.0, 61)
        ybar = ybar[np.abs(ybar - lam0) > 1e-9]
        x = (ybar - lam0) / math.sqrt(lam0)

        # constant fitted on single pixels, then checked on larger regions
        c_t = float(np.max(taylor_gap(model, ybar, 1) / np.abs(x) ** 3))
        assert c_t * math.sqrt(lam0) < 0.5
        for count in (4, 16, 64):
            gaps = taylor_gap(model, count * ybar, count)
            assert (gaps <= c_t * count * np.abs(x) ** 3 * (1 + 1e-9)).all()


# ------------------------------------------------------------------ #
# estimate_global
# ------------------------------------------------------------------ #


class TestEstimateGlobal:
    def test_poisson_constant_ones(self):
        report = estimate_global(POISSON, make_field(np.ones((8, 8)), COUNTS))
        assert report.theta_hat == (1.0,)
        assert report.method == 'global-mean'
        assert report.sample_size == 64

    def test_gaussian_two_points(self):
        report = estimate_global(GAUSS_UNKNOWN, make_field([0.0, 2.0]))
        assert report.theta_hat == (1.0,)
        assert report.xi_hat == (2.0,)

    def test_gaussian_constant_field(self):
        with pytest.raises(DegenerateData):
            estimate_global(GAUSS_UNKNOWN, make_field(np.full((4, 4), 3.0)))

    def test_gaussian_known_mean_kept(self, rng):
        data = make_field(rng.normal(0.3, 1.5, (32, 32)))
        report = estimate_global(GAUSS_UNKNOWN, data, known_theta=0.0)
        assert report.theta_hat == (0.0,)
        assert report.xi_hat[0] == pytest.approx(np.var(data.data, ddof=1))

    def test_gauss_known_needs_variance(self):
        with pytest.raises(ConfigError, match="variance"):
            estimate_global(GAUSS_KNOWN, make_field(np.zeros((2, 2))))

    def test_poisson_without_counts(self):
        with pytest.raises(DegenerateData):
            estimate_global(POISSON, make_field(np.zeros((4, 4)), COUNTS))

    def test_gamma_mle(self, rng):
        data = rng.gamma(2.5, 1 / 1.5, size=(128, 128))
        report = estimate_global(GAMMA, make_field(data, REALS))
        rate, shape = report.theta_hat[0], report.xi_hat[0]
        assert shape == pytest.approx(2.5, rel=0.05)
        assert rate == pytest.approx(1.5, rel=0.05)
        assert report.method == 'mle'

    @pytest.mark.parametrize('kind,draw,truth', [
        (POISSON, lambda rng, n: rng.poisson(2.0, (n, n)), 2.0),
        (GAUSS_UNKNOWN, lambda rng, n: rng.normal(0.5, 1.5, (n, n)), 0.5),
    ], ids=[POISSON, GAUSS_UNKNOWN])
    def test_error_shrinks_with_grid_size(self, rng, kind, draw, truth):
        dtype = COUNTS if kind == POISSON else REALS
        rmse = []
        for n in (32, 64, 128):
            estimates = [estimate_global(kind, make_field(draw(rng, n), dtype)).theta_hat[0]
                         for _ in range(40)]
            rmse.append(math.sqrt(np.mean((np.array(estimates) - truth) ** 2)))
        assert rmse[0] > rmse[1] > rmse[2]
        assert rmse[2] < 0.05

    def test_gamma_constant_field(self):
        with pytest.raises(DegenerateData):
            estimate_global(GAMMA, make_field(np.full((4, 4), 2.0)))

    def test_gamma_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            estimate_global(GAMMA, make_field(np.array([[1.0, 0.0], [2.0, 3.0]])))

    def test_model_from_estimates(self):
        report = estimate_global(POISSON, make_field(np.full((4, 4), 2.0), COUNTS))
        model = model_from_estimates(POISSON, report)
        assert model.provenance == 'estimated'
        assert model.theta0 == (2.0,)
