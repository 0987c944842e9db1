import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from rrw.specfun import (
    HANKEL_MIN,
    SERIES_MAX,
    ZeroNotConverged,
    ZeroTable,
    bessel_j,
    bessel_j_prime,
    bessel_zeros,
    mcmahon_guess,
    orthogonality_integral,
)

A_GRID = [0.5, 0.75, 1.0, 1.25, 1.5]


def mp_j(nu, x):
    with mpmath.workdps(30):
        return float(mpmath.besselj(nu, x))


class TestBesselValues:
    def test_half_order_zero_at_pi(self):
        assert abs(bessel_j(0.5, math.pi)) < 1e-15

    def test_half_order_closed_form(self):
        x = np.linspace(0.01, 60, 500)
        np.testing.assert_allclose(bessel_j(0.5, x), np.sqrt(2 / (np.pi * x)) * np.sin(x),
                                   rtol=0, atol=1e-14)

    def test_at_origin(self):
        assert bessel_j(1.0, 0.0) == 0.0
        assert bessel_j(0.0, 0.0) == 1.0

    def test_first_zero_order_zero(self):
        assert abs(bessel_j(0.0, 2.404825557695773)) < 1e-12

    @pytest.mark.parametrize("nu", [-0.5, -0.2, 0.0, 0.5, 0.8, 1.0, 4 / 3, 2.0, 3.7])
    def test_against_mpmath(self, nu):
        x = np.concatenate((np.linspace(0.01, 30, 300), np.geomspace(30, 3000, 60)))
        got = bessel_j(nu, x)
        want = np.array([mp_j(nu, xi) for xi in x])
        # compare against the oscillation envelope so zeros do not dominate
        envelope = np.minimum(1.0, np.sqrt(2 / (np.pi * x)) * 1.5)
        assert np.max(np.abs(got - want) / envelope) < 1e-12

    @pytest.mark.parametrize("x", [SERIES_MAX, HANKEL_MIN])
    @pytest.mark.parametrize("nu", [-0.4, 0.5, 1.0, 1.5])
    def test_continuous_across_regimes(self, nu, x):
        eps = 1e-9
        left, right = bessel_j(nu, x - eps), bessel_j(nu, x + eps)
        assert abs(right - left - 2 * eps * bessel_j_prime(nu, x)) < 1e-13

    def test_matches_scipy_on_grid(self):
        nu = np.linspace(0.5, 2.0, 7)[:, None]
        x = np.linspace(0.1, 100, 400)[None, :]
        np.testing.assert_allclose(bessel_j(nu, x), special.jv(nu, x), rtol=0, atol=1e-12)

    def test_broadcast_shape(self):
        assert bessel_j(np.array([0.5, 1.0])[:, None], np.ones(3)).shape == (2, 3)
        assert isinstance(bessel_j(1.0, 2.0), float)

    @pytest.mark.parametrize("nu,x", [(-1.0, 1.0), (-1.5, 1.0), (1.0, -0.1)])
    def test_domain_errors(self, nu, x):
        with pytest.raises(ValueError):
            bessel_j(nu, x)

    @settings(max_examples=300, deadline=None)
    @given(nu=st.floats(0.5, 2.0), x=st.floats(0.1, 100.0))
    def test_recurrence_residual(self, nu, x):
        res = bessel_j(nu - 1, x) + bessel_j(nu + 1, x) - 2 * nu / x * bessel_j(nu, x)
        assert abs(res) < 1e-10

    @settings(max_examples=100, deadline=None)
    @given(nu=st.floats(0.5, 2.0), x=st.floats(0.5, 80.0))
    def test_derivative_identity(self, nu, x):
        # J' = (J_{nu-1} - J_{nu+1}) / 2
        alt = 0.5 * (bessel_j(nu - 1, x) - bessel_j(nu + 1, x))
        assert abs(bessel_j_prime(nu, x) - alt) < 1e-10


class TestZeros:
    def test_half_order_closed_form(self):
        np.testing.assert_allclose(bessel_zeros(0.5, 3).zeros, np.pi * np.arange(1, 4), rtol=1e-14)

    def test_order_zero_values(self):
        z = bessel_zeros(0.0, 2).zeros
        np.testing.assert_allclose(z, [2.404825557695773, 5.520078110286311], rtol=1e-14)

    def test_interlacing(self):
        z0 = bessel_zeros(0.0, 6).zeros
        z1 = bessel_zeros(1.0, 5).zeros
        assert np.all(z0[:5] < z1) and np.all(z1 < z0[1:6])

    @pytest.mark.parametrize("nu", [0.0, 1.0, 2.0])
    def test_against_scipy_integer_orders(self, nu):
        got = bessel_zeros(nu, 200).zeros
        np.testing.assert_allclose(got, special.jn_zeros(int(nu), 200), rtol=1e-13)

    @pytest.mark.parametrize("a", A_GRID + [0.0, 1.9])
    def test_fractional_orders_verified(self, a):
        nu = 1.0 / (2.0 - a) - 1.0
        z = bessel_zeros(nu, 300).zeros
        assert np.all(np.diff(z) > 0)
        assert np.max(np.abs(bessel_j(nu, z))) < 1e-10
        lo, hi = bessel_j(nu, z - 1e-6), bessel_j(nu, z + 1e-6)
        assert np.all(lo * hi < 0)

    @pytest.mark.parametrize("nu", [-1 / 3, -0.2, 1 / 3, 0.6])
    def test_fractional_against_mpmath(self, nu):
        z = bessel_zeros(nu, 5).zeros
        with mpmath.workdps(30):
            ref = [float(mpmath.findroot(lambda t: mpmath.besselj(nu, t), zi)) for zi in z]
        np.testing.assert_allclose(z, ref, rtol=1e-14)

    @pytest.mark.parametrize("nu", [-0.4, 0.0, 0.5, 1.0, 2.0])
    def test_gap_asymptotics(self, nu):
        z = bessel_zeros(nu, 51).zeros
        assert abs(z[50] - z[49] - math.pi) < 1e-3

    def test_orders_nu_and_nu_plus_one_interlace(self):
        nu = 1 / 3
        a, b = bessel_zeros(nu, 20).zeros, bessel_zeros(nu + 1, 20).zeros
        assert np.all(a < b) and np.all(b[:-1] < a[1:])

    def test_mcmahon_large_n(self):
        z = bessel_zeros(0.25, 1000).zeros
        assert abs(mcmahon_guess(0.25, 1000) - z[-1]) < 1e-10

    def test_table_is_read_only(self):
        t = bessel_zeros(1.0, 3)
        assert isinstance(t, ZeroTable) and len(t) == 3
        with pytest.raises(ValueError):
            t.zeros[0] = 1.0

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            bessel_zeros(1.0, 0)
        with pytest.raises(ValueError):
            bessel_zeros(-1.0, 3)

    def test_failure_is_reported(self, monkeypatch):
        import rrw.specfun as sf

        monkeypatch.setattr(sf, "_newton", lambda nu, x0, **kw: None)
        monkeypatch.setattr(sf, "_bracketed", lambda nu, lo, hi: None)
        with pytest.raises(ZeroNotConverged):
            sf.bessel_zeros(1.0, 2)


class TestOrthogonality:
    @pytest.mark.parametrize("a", A_GRID)
    def test_off_diagonal(self, a):
        nu = 1.0 / (2.0 - a)
        zeros = bessel_zeros(nu - 1.0, 10)
        for m in range(1, 11):
            for n in range(m + 1, 11):
                assert abs(orthogonality_integral(nu, m, n, zeros)) < 1e-8

    @pytest.mark.parametrize("a", A_GRID)
    def test_diagonal(self, a):
        nu = 1.0 / (2.0 - a)
        zeros = bessel_zeros(nu - 1.0, 10)
        for m in range(1, 11):
            want = bessel_j(nu, zeros[m - 1]) ** 2 / 2
            assert abs(orthogonality_integral(nu, m, m, zeros) - want) < 1e-8

    def test_order_one_examples(self):
        assert abs(orthogonality_integral(1.0, 1, 2)) < 1e-8
        j = bessel_zeros(0.0, 1)[0]
        assert orthogonality_integral(1.0, 1, 1) == pytest.approx(bessel_j(1.0, j) ** 2 / 2, abs=1e-8)

    def test_half_order_closed_form(self):
        # zeros of J_{-1/2} are (n - 1/2) pi
        j = 0.5 * math.pi
        assert orthogonality_integral(0.5, 1, 1) == pytest.approx(bessel_j(0.5, j) ** 2 / 2, abs=1e-10)
        assert bessel_j(0.5, j) ** 2 / 2 == pytest.approx(2 / math.pi ** 2, rel=1e-13)

    def test_indices_start_at_one(self):
        with pytest.raises(ValueError):
            orthogonality_integral(1.0, 0, 1)
