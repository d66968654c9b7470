import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.special import logsumexp

from gkpdec.core import (
    TWO_PI,
    ConfigurationError,
    NoiseParams,
    VillainPotential,
    derive_rng,
    log_wrapped_gaussian_nb,
    sample_gaussian_shift,
    sigma0_from_photon_number,
    villain_cosine_fit,
    villain_derivative,
    villain_value,
    wrap,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)
periods = st.floats(0.1, 100.0)


def wide_villain(x, sigma, K=100_000):
    # brute-force sum over a very wide winding range, no wrapping
    k = np.arange(-K, K + 1)
    return -logsumexp(-(x + TWO_PI * k) ** 2 / (2 * sigma * sigma))


class TestWrap:
    def test_three_pi(self):
        r, k = wrap(3 * math.pi, TWO_PI)
        assert r == pytest.approx(-math.pi)
        assert k == 2

    def test_zero(self):
        assert wrap(0.0, TWO_PI) == (0.0, 0)

    def test_half_open_boundary(self):
        r, k = wrap(math.pi, TWO_PI)
        assert r == -math.pi and k == 1

    def test_lower_boundary_kept(self):
        r, k = wrap(-math.pi, TWO_PI)
        assert r == -math.pi and k == 0

    def test_bad_period(self):
        with pytest.raises(ConfigurationError):
            wrap(1.0, 0.0)

    @given(finite, periods)
    def test_range_and_winding(self, x, p):
        r, k = wrap(x, p)
        assert -p / 2 <= r < p / 2
        assert x - r == pytest.approx(k * p, abs=1e-9 * max(1.0, abs(x)))

    @given(finite, periods)
    def test_idempotent(self, x, p):
        r, _ = wrap(x, p)
        r2, k2 = wrap(r, p)
        assert r2 == r and k2 == 0

    @given(st.lists(finite, min_size=1, max_size=20), periods)
    def test_array_matches_scalar(self, xs, p):
        r, k = wrap(np.array(xs), p)
        for i, x in enumerate(xs):
            rs, ks = wrap(x, p)
            assert r[i] == pytest.approx(rs, abs=1e-9 * max(1.0, abs(x)))
            if abs(abs(rs) - p / 2) > 1e-9 * max(1.0, abs(x)):
                assert k[i] == ks


class TestNoiseParams:
    def test_scaling(self):
        p = NoiseParams.from_sigma0(0.3, 0.5, 2.0)
        assert p.sigma == pytest.approx(2 * math.sqrt(math.pi) * 0.3)
        assert p.sigmaM == pytest.approx(0.5 * p.sigma)
        assert p.sigmaT == pytest.approx(2.0 * p.sigma)

    def test_rejects_nonpositive_sigma0(self):
        with pytest.raises(ConfigurationError):
            NoiseParams.from_sigma0(0.0)

    def test_rejects_negative_ratio(self):
        with pytest.raises(ConfigurationError):
            NoiseParams.from_sigma0(0.3, -1.0)

    def test_photon_number_four(self):
        assert sigma0_from_photon_number(4) == pytest.approx(0.236, abs=5e-4)


class TestVillain:
    @given(st.floats(-50, 50), st.floats(0.1, 1.0))
    def test_periodic_and_even(self, x, s):
        V = VillainPotential(s)
        v = villain_value(V, x)
        assert villain_value(V, x + TWO_PI) == pytest.approx(v, abs=1e-9)
        assert villain_value(V, -x) == pytest.approx(v, abs=1e-9)

    def test_pi_minus_zero_against_wide_sum(self):
        V = VillainPotential(0.2, 10)
        got = villain_value(V, math.pi) - villain_value(V, 0.0)
        want = wide_villain(math.pi, 0.2) - wide_villain(0.0, 0.2)
        assert abs(got - want) < 1e-12

    @given(st.floats(-math.pi, math.pi), st.floats(0.1, 1.0), st.integers(5, 20))
    def test_cutoff_converged(self, x, s, K):
        a = villain_value(VillainPotential(s, K), x)
        b = villain_value(VillainPotential(s, K + 5), x)
        assert abs(a - b) < 1e-12

    def test_cosine_fit_beta(self):
        _, beta = villain_cosine_fit(VillainPotential(0.2))
        assert beta == pytest.approx(25.0, rel=0.05)

    def test_derivative_symmetric_points(self):
        V = VillainPotential(0.4)
        assert villain_derivative(V, 0.0) == 0.0
        assert abs(villain_derivative(V, math.pi)) < 1e-12

    def test_derivative_finite_difference(self):
        V = VillainPotential(0.3)
        h = 1e-6
        fd = (villain_value(V, 0.7 + h) - villain_value(V, 0.7 - h)) / (2 * h)
        assert villain_derivative(V, 0.7) == pytest.approx(fd, rel=1e-6)

    @pytest.mark.parametrize("s", [0.1, 0.3, 0.8])
    def test_derivative_random_points(self, s, rng):
        V = VillainPotential(s)
        x = rng.uniform(0.05, math.pi - 0.05, 100) * rng.choice([-1, 1], 100)
        h = 1e-6
        fd = (villain_value(V, x + h) - villain_value(V, x - h)) / (2 * h)
        np.testing.assert_allclose(villain_derivative(V, x), fd, rtol=1e-6)

    def test_normalization_matches_density_integral(self):
        s = 0.5
        V = VillainPotential(s)
        n = 4000
        x = -math.pi + TWO_PI * (np.arange(n) + 0.5) / n
        grid = np.sum(np.exp(-villain_value(V, x))) * TWO_PI / n
        direct = quad(lambda t: math.exp(-t * t / (2 * s * s)), -np.inf, np.inf)[0]
        assert grid == pytest.approx(direct, rel=1e-8)

    def test_log_wrapped_gaussian_matches_villain(self):
        for x in np.linspace(-3, 3, 13):
            assert log_wrapped_gaussian_nb(x, 0.4, TWO_PI, 10) == pytest.approx(
                -villain_value(VillainPotential(0.4), x), abs=1e-12)

    def test_bad_settings(self):
        with pytest.raises(ConfigurationError):
            VillainPotential(0.3, 0)
        with pytest.raises(ConfigurationError):
            VillainPotential(0.0)


class TestSampling:
    def test_zero_sigma(self, rng):
        assert sample_gaussian_shift(rng, 0.0) == 0.0
        assert np.all(sample_gaussian_shift(rng, 0.0, 5) == 0.0)

    def test_negative_sigma(self, rng):
        with pytest.raises(ConfigurationError):
            sample_gaussian_shift(rng, -1.0)

    def test_mean(self, rng):
        x = sample_gaussian_shift(rng, 1.0, 10**6)
        assert abs(x.mean()) < 4 / math.sqrt(10**6)

    def test_variance(self, rng):
        x = sample_gaussian_shift(rng, 0.5, 10**6)
        assert x.var() == pytest.approx(0.25, rel=0.01)

    def test_derived_streams(self):
        a = derive_rng(5, 1, 2).normal(size=4)
        b = derive_rng(5, 1, 2).normal(size=4)
        c = derive_rng(5, 1, 3).normal(size=4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
