import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import erfc

from brbm.stochastic import (
    AffineBoundary,
    RngStream,
    adaptive_simpson,
    bridge_crossing_prob,
    gaussian_tail_bound,
    reflected_density,
    sample_exponential,
    sample_gaussian,
)


def exact_tail(z):
    return 0.5 * erfc(z / math.sqrt(2.0))


class TestRngStream:
    def test_same_key_reproduces(self):
        a = RngStream(123, 7).generator.standard_normal(32)
        b = RngStream(123, 7).generator.standard_normal(32)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(123, 0).generator.standard_normal(32)
        b = RngStream(123, 1).generator.standard_normal(32)
        assert not np.array_equal(a, b)

    def test_streams_uncorrelated(self):
        n = 200_000
        a = RngStream(9, 0).generator.standard_normal(n)
        b = RngStream(9, 1).generator.standard_normal(n)
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 3.0 / math.sqrt(n)


class TestSampleGaussian:
    def test_degenerate_variance_returns_mean(self):
        assert sample_gaussian(RngStream(1, 0), 3.0, 0.0) == 3.0

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            sample_gaussian(RngStream(1, 0), 0.0, -1.0)

    def test_mean_std_normal(self):
        gen = RngStream(2, 0).generator
        draws = gen.standard_normal(10**6)
        assert abs(draws.mean()) < 0.004  # 3 sigma CLT band

    def test_variance_two(self):
        s = RngStream(3, 0)
        draws = np.array([sample_gaussian(s, 0.0, 2.0) for _ in range(200)])
        bulk = s.generator.standard_normal(10**6) * math.sqrt(2.0)
        all_draws = np.concatenate([draws, bulk])
        assert abs(all_draws.var() - 2.0) < 0.01


class TestSampleExponential:
    def test_rate_must_be_positive(self):
        with pytest.raises(ValueError):
            sample_exponential(RngStream(1, 0), 0.0)

    def test_positive_support(self):
        s = RngStream(4, 0)
        assert all(sample_exponential(s, 1.0) > 0 for _ in range(1000))

    def test_unit_rate_mean(self):
        draws = RngStream(5, 0).generator.standard_exponential(10**6)
        assert abs(draws.mean() - 1.0) < 0.003

    def test_rate_two_mean(self):
        draws = RngStream(6, 0).generator.standard_exponential(10**6) / 2.0
        assert abs(draws.mean() - 0.5) < 0.0015


class TestReflectedDensity:
    def test_frozen_values(self):
        assert reflected_density(0, 0, 1, 0) == pytest.approx(0.7978845608028654, abs=1e-12)
        assert reflected_density(0, 1, 1, 1) == pytest.approx(0.45293324691462084, abs=1e-12)
        assert reflected_density(0, 10, 1, 10) == pytest.approx(0.3989422804014327, abs=1e-7)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            reflected_density(1.0, 0.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            reflected_density(0.0, -0.5, 1.0, 0.0)
        with pytest.raises(ValueError):
            reflected_density(0.0, 0.5, 1.0, -0.1)

    @pytest.mark.parametrize("s,x,t", [(0.0, 0.0, 1.0), (0.0, 1.3, 2.0), (0.5, 0.2, 1.5)])
    def test_normalization(self, s, x, t):
        hi = x + 12.0 * math.sqrt(t - s)
        total = adaptive_simpson(lambda y: reflected_density(s, x, t, y), 0.0, hi, tol=1e-12)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_zero_flux_at_origin(self):
        # true derivative at y=0 vanishes, so the forward difference is O(eps)
        for eps in (1e-3, 1e-4):
            slope = (reflected_density(0, 0.7, 1, eps) - reflected_density(0, 0.7, 1, 0.0)) / eps
            assert abs(slope) < 2.0 * eps

    def test_chapman_kolmogorov(self):
        x, s, t, y = 0.4, 0.6, 1.4, 0.9
        hi = max(x, y) + 14.0
        conv = adaptive_simpson(
            lambda z: reflected_density(0, x, s, z) * reflected_density(s, z, t, y),
            0.0,
            hi,
            tol=1e-12,
        )
        assert conv == pytest.approx(reflected_density(0, x, t, y), abs=1e-6)


class TestBridgeCrossing:
    def test_start_on_boundary(self):
        assert bridge_crossing_prob(1.0, 0.0, 0.5, AffineBoundary(1.0, 0.5)) == 1.0

    def test_flat_boundary_value(self):
        b = AffineBoundary(2.0, 0.0)  # flat boundary
        p = bridge_crossing_prob(1.0, 1.0, 0.5, b)
        assert p == pytest.approx(math.exp(-4.0), rel=1e-12)

    def test_far_boundary_underflows(self):
        b = AffineBoundary(3.0, 0.0)
        assert bridge_crossing_prob(0.0, 0.0, 0.1, b) == pytest.approx(math.exp(-180.0), abs=1e-70)

    def test_bad_dt(self):
        with pytest.raises(ValueError):
            bridge_crossing_prob(0.0, 0.0, 0.0, AffineBoundary(1.0, 1.0))

    def test_endpoint_above_boundary_is_certain(self):
        assert bridge_crossing_prob(0.0, 5.0, 1.0, AffineBoundary(1.0, 1.0)) == 1.0

    @given(
        d0=st.floats(0.01, 5.0),
        d1=st.floats(0.01, 5.0),
        dt=st.floats(0.01, 5.0),
        bump=st.floats(0.01, 2.0),
    )
    def test_monotone_in_clearance_and_duration(self, d0, d1, dt, bump):
        b = AffineBoundary(10.0, 0.0)
        base = bridge_crossing_prob(10.0 - d0, 10.0 - d1, dt, b)
        assert bridge_crossing_prob(10.0 - d0 - bump, 10.0 - d1, dt, b) <= base
        assert bridge_crossing_prob(10.0 - d0, 10.0 - d1 - bump, dt, b) <= base
        assert bridge_crossing_prob(10.0 - d0, 10.0 - d1, dt + bump, b) >= base

    def test_in_unit_interval(self):
        b = AffineBoundary(1.5, 0.3)
        for x0, x1, dt in [(0.0, 1.0, 0.2), (1.0, 1.4, 0.05), (-2.0, 0.5, 1.0)]:
            assert 0.0 <= bridge_crossing_prob(x0, x1, dt, b) <= 1.0


class TestGaussianTailBound:
    def test_frozen_values(self):
        assert gaussian_tail_bound(2.0) == pytest.approx(0.026995483256594, abs=1e-12)
        assert gaussian_tail_bound(1.0) == pytest.approx(0.241970724519143, abs=1e-12)

    def test_dominates_exact_tail_on_grid(self):
        for z in np.arange(0.1, 8.05, 0.1):
            assert gaussian_tail_bound(z) >= exact_tail(z)

    def test_mills_ratio_approaches_one(self):
        ratios = [gaussian_tail_bound(z) / exact_tail(z) for z in (2.0, 4.0, 6.0, 8.0)]
        assert all(r >= 1.0 for r in ratios)
        assert all(a > b for a, b in zip(ratios, ratios[1:]))
        assert ratios[-1] == pytest.approx(1.0, abs=2.0 / 64.0)

    def test_domain(self):
        with pytest.raises(ValueError):
            gaussian_tail_bound(0.0)
        with pytest.raises(ValueError):
            gaussian_tail_bound(-1.0)


class TestAffineBoundary:
    def test_positive_coefficients_required(self):
        with pytest.raises(ValueError):
            AffineBoundary(0.0, 1.0)
        with pytest.raises(ValueError):
            AffineBoundary(1.0, -0.5)
        AffineBoundary(1.0, 0.0)  # flat is allowed for bridge checks

    def test_value(self):
        assert AffineBoundary(1.0, 2.0).value(3.0) == 7.0
