import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import expon, norm

from spectrakit.bahadur import (
    ALTERNATIVES,
    SlopeInputs,
    alternative_density,
    approx_slope,
    local_efficiency,
    local_slope,
    tabulated_b,
)


def quiet(lambda1, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        return SlopeInputs(lambda1, b, **kw)


class TestApproxSlope:
    def test_linear(self):
        assert approx_slope(quiet(1.0, lambda t: t), 0.5) == 0.25

    def test_cvm_coefficient(self):
        inp = quiet(1 / math.pi**2, lambda t: t)
        assert approx_slope(inp, 1.0) == pytest.approx(math.pi**2, rel=1e-14)
        assert approx_slope(inp, 1.0) == pytest.approx(9.8696, abs=1e-4)

    def test_zero_b(self):
        inp = quiet(0.3, lambda t: 0.0)
        assert all(approx_slope(inp, t) == 0.0 for t in (0.0, 0.1, 2.0))

    @settings(max_examples=50, deadline=None)
    @given(theta=st.floats(-2, 2), c=st.floats(0.1, 10), lam=st.floats(0.01, 10))
    def test_scale_equivariance(self, theta, c, lam):
        base = approx_slope(quiet(lam, math.sin), theta)
        scaled_b = approx_slope(quiet(lam, lambda t: c * math.sin(t)), theta)
        scaled_l = approx_slope(quiet(c * lam, math.sin), theta)
        assert scaled_b == pytest.approx(c * c * base, rel=1e-12, abs=1e-300)
        assert scaled_l == pytest.approx(base / c, rel=1e-12, abs=1e-300)


class TestLocalSlope:
    def test_quadratic(self):
        assert local_slope(quiet(1.0, lambda t: t * t), 0.1) == pytest.approx(0.01, rel=1e-9)

    def test_sine_squared(self):
        assert abs(local_slope(quiet(2.0, lambda t: math.sin(t) ** 2), 0.1) - 0.005) < 1e-6

    def test_cubic(self):
        assert local_slope(quiet(1.0, lambda t: t**3), 0.1) == pytest.approx(0.0, abs=1e-12)

    def test_nonpolynomial(self):
        # b''(0) = 1, so the slope is theta^2 / (2 * 0.5)
        inp = quiet(0.5, lambda t: math.expm1(t * t / 2.0))
        theta = 1e-2
        assert local_slope(inp, theta) == pytest.approx(theta**2, rel=1e-6)

    def test_kink_raises(self):
        with pytest.raises(ArithmeticError, match="unstable"):
            local_slope(quiet(1.0, lambda t: abs(t) ** 1.5), 0.1)

    @settings(max_examples=30, deadline=None)
    @given(c=st.floats(0.1, 10), lam=st.floats(0.01, 10))
    def test_scale_equivariance(self, c, lam):
        base = local_slope(quiet(lam, lambda t: t * t), 0.2)
        assert local_slope(quiet(lam, lambda t: c * t * t), 0.2) == pytest.approx(c * base, rel=1e-8)
        assert local_slope(quiet(c * lam, lambda t: t * t), 0.2) == pytest.approx(base / c, rel=1e-8)


class TestEfficiency:
    def test_one(self):
        inp = quiet(1.0, lambda t: t * t, kl=lambda t: t * t / 2)
        assert local_efficiency(inp, 0.1) == pytest.approx(1.0, rel=1e-9)

    def test_half(self):
        inp = quiet(1.0, lambda t: t * t, kl=lambda t: t * t)
        assert local_efficiency(inp, 0.1) == pytest.approx(0.5, rel=1e-9)

    def test_small_theta_stability(self):
        inp = quiet(1.0, lambda t: math.sin(t) ** 2, kl=lambda t: t * t * (1 + t * t) / 2)
        a, b = local_efficiency(inp, 1e-2), local_efficiency(inp, 1e-3)
        assert abs(a - b) < 1e-3

    def test_above_one_warns(self):
        inp = quiet(1.0, lambda t: t * t, kl=lambda t: t * t / 4)
        with pytest.warns(RuntimeWarning, match="exceeds 1"):
            assert local_efficiency(inp, 0.1) == pytest.approx(2.0, rel=1e-9)

    def test_requires_kl(self):
        with pytest.raises(ValueError, match="kl"):
            local_efficiency(quiet(1.0, lambda t: t * t), 0.1)

    def test_nonpositive_kl(self):
        inp = quiet(1.0, lambda t: t * t, kl=lambda t: 0.0)
        with pytest.raises(ValueError):
            local_efficiency(inp, 0.1)


class TestInputs:
    @pytest.mark.parametrize("lam", [0.0, -1.0])
    def test_bad_lambda(self, lam):
        with pytest.raises(ValueError):
            SlopeInputs(lam, lambda t: t)

    def test_bad_step(self):
        with pytest.raises(ValueError):
            SlopeInputs(1.0, lambda t: t, h=0.0)

    def test_b0_warning(self):
        with pytest.warns(RuntimeWarning, match="b\\(0\\)"):
            SlopeInputs(1.0, lambda t: 1.0 + t)


class TestTabulated:
    def test_reproduces_smooth_function(self):
        grid = np.linspace(-0.5, 0.5, 201)
        b = tabulated_b(grid, np.sin(grid) ** 2)
        inp = quiet(2.0, b, h=0.02)
        assert local_slope(inp, 0.1) == pytest.approx(0.005, rel=1e-4)
        assert b(0.123) == pytest.approx(math.sin(0.123) ** 2, abs=1e-8)

    def test_out_of_range(self):
        b = tabulated_b([0, 1, 2, 3], [0, 1, 4, 9])
        with pytest.raises(ValueError, match="outside"):
            b(-0.1)

    def test_bad_tables(self):
        with pytest.raises(ValueError):
            tabulated_b([0, 1, 2], [0, 1, 2])
        with pytest.raises(ValueError):
            tabulated_b([0, 1, 1, 2], [0, 1, 1, 2])


EXP_CASES = [("weibull", 0.4, {}), ("gamma", 0.4, {}), ("makeham", 0.4, {}), ("lfr", 0.4, {}),
             ("emnw", 0.4, {"beta": 3.0})]
NORMAL_CASES = [("lehmann", 0.4, {}), ("ley_paindaveine_1", 0.4, {}), ("ley_paindaveine_2", 0.3, {}),
                ("contamination", 0.4, {"mu": 1.0, "sigma": 2.0})]


class TestAlternatives:
    def test_registry(self):
        assert {c[0] for c in EXP_CASES + NORMAL_CASES} == set(ALTERNATIVES)

    @pytest.mark.parametrize("name,theta,kw", EXP_CASES)
    def test_exponential_family(self, name, theta, kw):
        mass, _ = quad(lambda x: alternative_density(name, x, theta, **kw), 0, np.inf)
        assert mass == pytest.approx(1.0, abs=1e-8)
        x = np.linspace(0, 5, 11)
        np.testing.assert_allclose(alternative_density(name, x, 0.0, **kw), expon.pdf(x), rtol=1e-12)
        assert np.all(alternative_density(name, x, theta, **kw) >= 0)

    @pytest.mark.parametrize("name,theta,kw", NORMAL_CASES)
    def test_normal_family(self, name, theta, kw):
        mass, _ = quad(lambda x: alternative_density(name, x, theta, **kw), -np.inf, np.inf)
        assert mass == pytest.approx(1.0, abs=1e-8)
        x = np.linspace(-4, 4, 17)
        np.testing.assert_allclose(alternative_density(name, x, 0.0, **kw), norm.pdf(x), rtol=1e-12)
        assert np.all(alternative_density(name, x, theta, **kw) >= 0)

    def test_errors(self):
        with pytest.raises(ValueError, match="unknown"):
            alternative_density("cauchy", 0.0, 0.1)
        with pytest.raises(ValueError):
            alternative_density("weibull", -1.0, 0.1)
        with pytest.raises(ValueError):
            alternative_density("weibull", 1.0, -0.1)
        with pytest.raises(ValueError, match="1/pi"):
            alternative_density("ley_paindaveine_2", 0.0, 0.5)
        with pytest.raises(ValueError):
            alternative_density("emnw", 1.0, 0.6, beta=3.0)
        with pytest.raises(ValueError):
            alternative_density("contamination", 0.0, 0.1, sigma=0.0)
