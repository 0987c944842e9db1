import math

import numpy as np
import pytest
from scipy import integrate

from rrw.chain import WalkSpec, return_distribution
from rrw.continuum import (
    ContinuumModel,
    TruncationError,
    asymptotic_coefficient,
    boundary_current,
    coefficients,
    coefficients_a1,
    density,
    density_a1,
    discrete_return,
    mode_function,
    ode_residual,
    return_density,
)
from rrw.specfun import bessel_j, bessel_zeros

J01 = 2.404825557695773


@pytest.fixture(scope="module")
def model_a1():
    return ContinuumModel.build(1.0, 1000, 1000)


class TestCoefficients:
    @pytest.mark.parametrize("L", [10, 100, 1000, 10**4])
    def test_a1_reduction(self, L):
        np.testing.assert_allclose(coefficients(1.0, L, 300), coefficients_a1(L, 300), rtol=1e-13, atol=0)

    def test_first_coefficient_by_hand(self):
        want = bessel_j(1.0, J01 / 10) / (bessel_j(1.0, J01) ** 2 * 10)
        assert coefficients(1.0, 100, 1)[0] == pytest.approx(want, rel=1e-13)

    @pytest.mark.parametrize("a", [0.75, 1.0, 1.25])
    def test_large_n_form(self, a):
        # relative to the amplitude envelope: pointwise ratios blow up at cosine nodes
        L = 10**4
        m = ContinuumModel.build(a, L, 400)
        env = np.sqrt(2 * math.pi * m.zeros) * (1 - a / 2) * L ** (-a / 4)
        n = 199
        err = abs(m.coeffs[n] - asymptotic_coefficient(a, L, n + 1, zero=m.zeros[n])) / env[n]
        assert err < 0.05

    def test_large_n_form_improves_deep_in_oscillatory_regime(self):
        L = 10**4
        m = ContinuumModel.build(1.0, L, 2000)
        env = np.sqrt(2 * math.pi * m.zeros) * 0.5 * L ** -0.25
        asy = np.array([asymptotic_coefficient(1.0, L, n + 1, zero=m.zeros[n]) for n in range(1900, 2000)])
        assert np.max(np.abs(m.coeffs[1900:] - asy) / env[1900:]) < 0.01

    def test_asymptotic_form_default_zero(self):
        z = bessel_zeros(0.0, 200).zeros[-1]
        assert asymptotic_coefficient(1.0, 10**4, 200) == asymptotic_coefficient(1.0, 10**4, 200, zero=z)

    def test_asymptotic_vanishes_at_cosine_node(self):
        L = 10**4
        node = (0.5 * math.pi + 0.5 * math.pi + 0.25 * math.pi) * math.sqrt(L)
        assert abs(asymptotic_coefficient(1.0, L, 1, zero=node)) < 1e-12

    @pytest.mark.parametrize("a", [0.0, 2.0, -1.0])
    def test_exponent_range(self, a):
        with pytest.raises(ValueError):
            coefficients(a, 100, 5)


class TestModel:
    def test_rates_increasing_and_read_only(self, model_a1):
        assert np.all(np.diff(model_a1.rates) > 0)
        assert model_a1.nu == 1.0 and model_a1.B == 0.0
        with pytest.raises(ValueError):
            model_a1.coeffs[0] = 0.0

    def test_order(self):
        assert ContinuumModel.build(1.5, 100, 3).nu == pytest.approx(2.0)


class TestDensity:
    def test_a1_reduction(self, model_a1):
        x = np.array([1e-4, 0.003, 0.1, 0.5, 0.999, 1.0])
        j = model_a1.zeros[:, None]
        for t in (0.05, 1.0, 30.0, 500.0):
            got, _ = density(model_a1, x, t)
            want = density_a1(1000, 1000, x, t)
            # the sum's own conditioning: sum of absolute term sizes
            terms = (model_a1.coeffs * np.exp(-model_a1.rates * t))[:, None] * bessel_j(1.0, j * np.sqrt(x)) / np.sqrt(x)
            scale = np.abs(terms).sum(axis=0)
            assert np.all(np.abs(got - want) <= 1e-13 * scale)

    def test_mode_one_decays_tenfold(self):
        L = 100
        m = ContinuumModel.build(1.0, L, 1)
        t = 8 * L * math.log(10) / J01 ** 2
        assert math.exp(-m.rates[0] * t) == pytest.approx(0.1, rel=1e-14)
        assert density(m, 0.5, t)[0] / density(m, 0.5, 1e-300)[0] == pytest.approx(0.1, rel=1e-12)

    @pytest.mark.parametrize("a", [0.5, 1.0, 1.25, 1.75])
    def test_small_x_branch_is_continuous(self, a):
        m = ContinuumModel.build(a, 1000, 200)
        lo, _ = density(m, 1e-6 * (1 - 1e-9), 0.5)
        hi, _ = density(m, 1e-6, 0.5)
        assert lo == pytest.approx(hi, rel=1e-6)

    def test_small_x_limit_is_finite(self):
        m = ContinuumModel.build(1.0, 1000, 200)
        near, _ = density(m, 1e-300, 0.5)
        assert np.isfinite(near)
        assert near == pytest.approx(density(m, 1e-12, 0.5)[0], rel=1e-6)

    @staticmethod
    def _budget(a, t0, L=1000):
        m = ContinuumModel.build(a, L, 1000)

        def mass(t):
            f = lambda x: density(m, x, t)[0]
            return integrate.quad(f, 0, 1, limit=500, epsabs=1e-13, epsrel=1e-12)[0]

        flux = integrate.quad(lambda t: boundary_current(m, t), t0, L, limit=500,
                              epsabs=1e-13, epsrel=1e-12, points=[1, 10, 100])[0]
        return mass(t0), mass(L), flux

    @pytest.mark.parametrize("t0", [0.05, 0.1])
    @pytest.mark.parametrize("a", [0.75, 1.0, 1.25])
    def test_mass_balance(self, a, t0):
        before, after, flux = self._budget(a, t0)
        assert abs(before - after - flux) < 1e-9

    @pytest.mark.parametrize("a", [1.0, 1.25])
    def test_probability_conservation(self, a):
        # the current series diverges as t -> 0, so the budget starts at t0 = 0.05
        # (50 steps), before any mass has reached the edge
        before, after, flux = self._budget(a, 0.05)
        assert abs(before - 1.0) < 1e-9
        assert abs(after + flux - 1.0) < 1e-6

    def test_rejects_t_zero_and_bad_x(self, model_a1):
        with pytest.raises(ValueError):
            density(model_a1, 0.5, 0.0)
        with pytest.raises(ValueError):
            density(model_a1, 0.0, 1.0)
        with pytest.raises(ValueError):
            density(model_a1, 1.5, 1.0)

    def test_tolerance_enforced(self, model_a1):
        with pytest.raises(TruncationError):
            density(model_a1, 0.5, 1e-5, tol=1e-12)


class TestReturnDensity:
    def test_late_time_rate(self, model_a1):
        # well past 8L / j_2^2 ~ 262, where mode 1 dominates
        t = np.linspace(5000, 10000, 50)
        v, _ = return_density(model_a1, t)
        slope = np.polyfit(t, np.log(v), 1)[0]
        assert slope == pytest.approx(-J01 ** 2 / 8000, rel=0.01)

    def test_single_mode_dominance(self, model_a1):
        t = 8 * 1000 / 5.520078110286311 ** 2 * 30
        v, _ = return_density(model_a1, t)
        one = 0.5 * math.sqrt(1000) * model_a1.coeffs[0] * model_a1.edge[0] * math.exp(-model_a1.rates[0] * t)
        assert v == pytest.approx(one, rel=1e-6)

    @pytest.mark.parametrize("a", [0.75, 1.0, 1.25])
    def test_ratio_approaches_slowest_mode(self, a):
        m = ContinuumModel.build(a, 1000, 200)
        tau = 5.0
        prev = None
        for t in (100.0, 1000.0, 10000.0):
            v0, _ = return_density(m, t)
            v1, _ = return_density(m, t + tau)
            err = abs(v1 / v0 - math.exp(-m.rates[0] * tau))
            if prev is not None:
                assert err <= prev
            prev = err
        # mode 2 is down by exp(-(k_2 - k_1) t) < 1e-9 here for all three exponents
        assert prev < 1e-8

    @pytest.mark.parametrize("a", [0.75, 1.0, 1.25])
    def test_truncation_control(self, a):
        m1 = ContinuumModel.build(a, 1000, 1000)
        m2 = ContinuumModel.build(a, 1000, 2000)
        t = np.geomspace(1e-3, 100, 60)
        v1, est = return_density(m1, t)
        v2, _ = return_density(m2, t)
        assert np.all(np.abs(v2 - v1) <= est)

    def test_tolerance_enforced(self, model_a1):
        with pytest.raises(TruncationError):
            return_density(model_a1, 1e-5, tol=1e-12)

    def test_matching_constant(self, model_a1):
        # per-step mass: density in t at x = 1/L, times 1/L twice
        exact = return_distribution(WalkSpec(1.0, 1000), 200000, tail_from=100000)
        s = np.array([50000, 100000, 200000])
        cont, _ = discrete_return(model_a1, s)
        np.testing.assert_allclose(cont, exact.at(s), rtol=0.01)

    def test_rejects_nonpositive_time(self, model_a1):
        with pytest.raises(ValueError):
            return_density(model_a1, [1.0, 0.0])


class TestModeEquation:
    def test_residual_and_boundaries(self, model_a1):
        out = ode_residual(model_a1, 1, np.linspace(1e-3, 1 - 1e-4, 1000), h=1e-4)
        assert out["residual"] < 1e-4
        assert abs(out["slope_at_one"]) < 1e-6
        assert abs(out["slope_at_one_fd"]) < 1e-6
        assert abs(out["q_near_zero"]) < 1e-9

    @pytest.mark.parametrize("n", [1, 3])
    def test_second_order_convergence(self, model_a1, n):
        x = np.linspace(1e-2, 0.99, 500)
        r1 = ode_residual(model_a1, n, x, h=4e-3)["residual"]
        r2 = ode_residual(model_a1, n, x, h=2e-3)["residual"]
        assert r1 / r2 == pytest.approx(4.0, rel=0.05)

    @pytest.mark.parametrize("a", [0.5, 0.75, 1.25, 1.5])
    def test_edge_slope_other_exponents(self, a):
        m = ContinuumModel.build(a, 1000, 10)
        for n in range(1, 11):
            assert abs(ode_residual(m, n, [0.5])["slope_at_one"]) < 1e-6

    def test_mode_function_matches_definition(self, model_a1):
        x = np.array([0.2, 0.7])
        want = np.sqrt(x) * bessel_j(1.0, model_a1.zeros[4] * np.sqrt(x))
        np.testing.assert_allclose(mode_function(model_a1, 5, x), want, rtol=1e-15)

    def test_mode_index(self, model_a1):
        with pytest.raises(ValueError):
            ode_residual(model_a1, 0, [0.5])


def _max_gap(a, L):
    m = ContinuumModel.build(a, L, 1000)
    exact = return_distribution(WalkSpec(a, L), 40 * L * L, tail_from=L * L // 10)
    mask = exact.p_r > 1e-8
    s = exact.s[mask]
    cont, _ = discrete_return(m, s)
    return np.max(np.abs(cont / exact.p_r[mask] - 1.0))


@pytest.mark.xfail(strict=True, reason="the early-time gap is set by lattice-scale start and grows with L; see notes")
@pytest.mark.parametrize("a", [0.75, 1.0, 1.25])
def test_gap_shrinks_with_size(a):
    gaps = [_max_gap(a, L) for L in (250, 500, 1000)]
    assert gaps[0] > gaps[1] > gaps[2]
