"""Fourier-Bessel solution of the continuum limit of the walk.

With x = n/L and t = s/L the master equation becomes

    dP/dt = 1/(2L) d^2/dx^2 [x^a P],

absorbing at x = 0 and zero-current at x = 1.  Writing ``nu = 1/(2-a)`` and
``j_n`` for the zeros of ``J_{nu-1}``, the solution started from a unit mass at
x = 1/L is

    P(x, t) = sum_n A_n J_nu(j_n x^(1-a/2)) / x^(a-1/2) exp(-k_n t),
    k_n = (2-a)^2 j_n^2 / (8L).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .specfun import bessel_j, bessel_zeros

__all__ = [
    "ContinuumModel",
    "TruncationError",
    "coefficients",
    "coefficients_a1",
    "asymptotic_coefficient",
    "density",
    "density_a1",
    "return_density",
    "discrete_return",
    "boundary_current",
    "ode_residual",
]


class TruncationError(ArithmeticError):
    """The truncated series cannot meet the requested tolerance."""


def _order(a):
    if not 0.0 < a < 2.0:
        raise ValueError(f"continuum model needs 0 < a < 2, got {a}")
    return 1.0 / (2.0 - a)


def _coefficients_from_zeros(a, L, nu, j):
    return (2.0 * (1.0 - a / 2.0) / (bessel_j(nu, j) ** 2 * math.sqrt(L))
            * bessel_j(nu, j / L ** (1.0 - a / 2.0)))


def coefficients(a, L, N):
    """Expansion coefficients ``A_n``, ``n = 1..N``, for the start at x = 1/L."""
    nu = _order(a)
    if N < 1:
        raise ValueError("N must be >= 1")
    j = bessel_zeros(nu - 1.0, N).zeros
    return _coefficients_from_zeros(a, L, nu, j)


def coefficients_a1(L, N):
    """``A_n`` written out for a = 1: ``J_1(j_{0,n}/sqrt(L)) / (J_1(j_{0,n})^2 sqrt(L))``."""
    j = bessel_zeros(0.0, N).zeros
    rl = math.sqrt(L)
    return bessel_j(1.0, j / rl) / (bessel_j(1.0, j) ** 2 * rl)


def asymptotic_coefficient(a, L, n, zero=None):
    """Large-``n`` form of ``A_n`` from the Hankel expansion of ``J_nu(j_n)``."""
    nu = _order(a)
    if zero is None:
        zero = bessel_zeros(nu - 1.0, int(n)).zeros[-1]
    return (math.sqrt(2.0 * math.pi * zero) * (1.0 - a / 2.0) * L ** (-a / 4.0)
            * math.cos(zero / L ** (1.0 - a / 2.0) - math.pi / (2.0 * (2.0 - a)) - math.pi / 4.0))


@dataclass(frozen=True)
class ContinuumModel:
    """Zeros, coefficients and decay rates for given ``a``, ``L`` and ``N`` terms.

    Construct with :meth:`build`; the arrays are read-only afterwards.
    """

    a: float
    L: int
    N: int
    nu: float
    zeros: np.ndarray
    coeffs: np.ndarray
    rates: np.ndarray
    # J_nu(j_n L^{-(1-a/2)}), reused by the return-time series
    edge: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, a, L, N=1000):
        nu = _order(a)
        if L < 2 or N < 1:
            raise ValueError("need L >= 2 and N >= 1")
        j = bessel_zeros(nu - 1.0, N).zeros
        A = _coefficients_from_zeros(a, L, nu, j)
        rates = (2.0 - a) ** 2 * j ** 2 / (8.0 * L)
        edge = bessel_j(nu, j / L ** (1.0 - a / 2.0))
        for arr in (j, A, rates, edge):
            arr.setflags(write=False)
        return cls(float(a), int(L), int(N), nu, j, A, rates, edge)

    @property
    def B(self):
        """Coefficient of the Neumann branch; zero for a finite density at x = 0."""
        return 0.0

    def _tail_factor(self, t):
        """Bound on ``sum_{n>N} sqrt(j_n / j_{N+1}) exp(-k_n t)`` relative to the first omitted term.

        Consecutive zeros are at least ~pi apart, so the exponential factors
        shrink at least geometrically with ratio ``exp(-c ((j+pi)^2 - j^2))``.
        """
        a, L = self.a, self.L
        j_next = self.zeros[-1] + math.pi
        c = (2.0 - a) ** 2 * t / (8.0 * L)
        first = math.exp(-c * j_next ** 2)
        ratio = math.exp(-c * 2.0 * math.pi * j_next) * math.sqrt(1.0 + math.pi / j_next)
        if ratio >= 1.0:
            return j_next, math.inf
        return j_next, first / (1.0 - ratio)

    def _amplitude_envelope(self, j):
        # |A_n| <= sqrt(2 pi j) (1 - a/2) L^{-a/4}, from the large-n form
        return math.sqrt(2.0 * math.pi * j) * (1.0 - self.a / 2.0) * self.L ** (-self.a / 4.0)

    def truncation_estimate_density(self, x, t):
        j_next, tail = self._tail_factor(t)
        z = j_next * x ** (1.0 - self.a / 2.0)
        bessel_env = min(1.0, math.sqrt(2.0 / (math.pi * z)))
        return self._amplitude_envelope(j_next) * bessel_env / x ** (self.a - 0.5) * tail

    def truncation_estimate_return(self, t):
        j_next, tail = self._tail_factor(t)
        z = j_next / self.L ** (1.0 - self.a / 2.0)
        bessel_env = min(1.0, math.sqrt(2.0 / (math.pi * z)))
        return 0.5 * math.sqrt(self.L) * self._amplitude_envelope(j_next) * bessel_env * tail


def _mode_profile(model, x):
    """``J_nu(j_n x^(1-a/2)) / x^(a-1/2)`` for every mode, shape (N,) + x.shape."""
    a, nu = model.a, model.nu
    x = np.asarray(x, dtype=float)
    j = model.zeros.reshape((-1,) + (1,) * x.ndim)
    u = x ** (1.0 - a / 2.0)
    out = bessel_j(nu, j * u) / x ** (a - 0.5)
    small = x < 1e-6
    if np.any(small):
        # J_nu(j u) / x^(a-1/2) = j^nu x^(1-a) * [J_nu(z) / z^nu], z = j u, with the
        # bracket at its series limit 1 / (2^nu Gamma(nu+1)) when z underflows
        xs = np.where(small, x, 1e-6)
        z = j * xs ** (1.0 - a / 2.0)
        limit = 1.0 / (2.0 ** nu * math.gamma(nu + 1.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(z > 1e-150, bessel_j(nu, z) / z ** nu, limit)
        out = np.where(small, j ** nu * xs ** (1.0 - a) * ratio, out)
    return out


def density(model, x, t, tol=None):
    """Probability density ``P(x, t)`` from the truncated Fourier-Bessel series.

    Parameters
    ----------
    model : ContinuumModel
    x : float or array_like
        Positions in (0, 1].
    t : float
        Rescaled time ``s / L``; must be positive.  For ``N = 1000`` the
        series is trustworthy from roughly ``t ~ 1/L`` on.
    tol : float, optional
        Raise :class:`TruncationError` when the tail estimate exceeds it.

    Returns
    -------
    value, tail_estimate
    """
    if t <= 0:
        raise ValueError("density needs t > 0; the series does not converge pointwise at t = 0")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0) or np.any(x_arr > 1):
        raise ValueError("x must lie in (0, 1]")
    decay = np.exp(-model.rates * t)
    prof = _mode_profile(model, x_arr)
    w = (model.coeffs * decay).reshape((-1,) + (1,) * x_arr.ndim)
    val = np.sum(w * prof, axis=0)
    est = np.vectorize(lambda xx: model.truncation_estimate_density(xx, t))(x_arr)
    if tol is not None and np.any(est > tol):
        raise TruncationError(f"tail estimate {np.max(est):.2e} exceeds tol {tol:.2e} at t={t}")
    if x_arr.ndim == 0:
        return float(val), float(est)
    return val, est


def density_a1(L, N, x, t, zeros=None):
    """The a = 1 series ``sum A_n J_1(j_{0,n} sqrt(x)) / sqrt(x) exp(-j_{0,n}^2 t / (8L))``."""
    if zeros is None:
        zeros = bessel_zeros(0.0, N).zeros
    rl = math.sqrt(L)
    A = bessel_j(1.0, zeros / rl) / (bessel_j(1.0, zeros) ** 2 * rl)
    x = np.asarray(x, dtype=float)
    j = zeros.reshape((-1,) + (1,) * x.ndim)
    terms = ((A * np.exp(-zeros ** 2 * t / (8.0 * L))).reshape(j.shape)
             * bessel_j(1.0, j * np.sqrt(x)) / np.sqrt(x))
    val = terms.sum(axis=0)
    return float(val) if x.ndim == 0 else val


def return_density(model, t, tol=None):
    """First-return density in rescaled time, from the current next to x = 0.

    ``sqrt(L)/2 * sum_n A_n J_nu(j_n L^-(1-a/2)) exp(-k_n t)``.  Accepts an
    array of times.  Returns ``(value, tail_estimate)``.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError("return_density needs t > 0")
    w = model.coeffs * model.edge
    # exponent can be large; evaluate mode-by-mode in blocks to bound memory
    flat = t_arr.ravel()
    val = np.empty_like(flat)
    for start in range(0, flat.size, 2048):
        tt = flat[start:start + 2048]
        # modes with rate * t > 745 underflow to exactly 0 and can be skipped
        m = int(np.searchsorted(model.rates, 745.0 / tt.min(), side="right"))
        val[start:start + 2048] = np.exp(-np.outer(tt, model.rates[:m])) @ w[:m]
    val = 0.5 * math.sqrt(model.L) * val.reshape(t_arr.shape)
    est = np.array([model.truncation_estimate_return(tt) for tt in flat]).reshape(t_arr.shape)
    if tol is not None and np.any(est > tol):
        raise TruncationError(f"tail estimate {np.max(est):.2e} exceeds tol {tol:.2e}")
    if t_arr.ndim == 0:
        return float(val), float(est)
    return val, est


def boundary_current(model, t):
    """Probability current into the absorbing edge, ``(1/2L) d/dx [x^a P]`` at x = 0.

    Each mode contributes ``A_n (j_n/2)^nu / Gamma(nu+1)`` since
    ``Q_n(x) ~ (j_n/2)^nu x / Gamma(nu+1)`` near the edge.  The time integral
    of this current is the mass lost from the interior.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError("boundary_current needs t > 0")
    slope0 = (model.zeros / 2.0) ** model.nu / math.gamma(model.nu + 1.0)
    w = model.coeffs * slope0 / (2.0 * model.L)
    val = np.exp(-np.multiply.outer(t_arr, model.rates)) @ w
    return float(val) if t_arr.ndim == 0 else val


def discrete_return(model, s, tol=None):
    """Per-step first-return probability implied by the continuum series.

    Step ``s`` corresponds to ``t = s/L``.  ``return_density`` already
    carries a factor ``L`` from evaluating the boundary term at x = 1/L and is
    a density in t (another ``L`` per step), hence the ``1/L**2`` scale.
    """
    s = np.asarray(s, dtype=float)
    val, est = return_density(model, s / model.L, tol=tol)
    return val / model.L ** 2, est / model.L ** 2


def mode_function(model, n, x):
    """``Q_n(x) = sqrt(x) J_nu(j_n x^(1-a/2))``, the spatial factor of ``x^a P``."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(x) * bessel_j(model.nu, model.zeros[n - 1] * x ** (1.0 - model.a / 2.0))


def ode_residual(model, n, x_samples, h=1e-4):
    """Check mode ``n`` against ``Q'' + lam^2 / (4 x^a) Q = 0`` and its boundary values.

    ``lam = (2-a) j_n``.  Second derivatives are central differences with
    step ``h``.

    Returns
    -------
    dict
        ``residual``: max |Q'' + lam^2 Q / (4 x^a)| over the samples;
        ``q_near_zero``: Q at x = 1e-12;
        ``slope_at_one``: dQ/dx at x = 1, exact via
        ``d/du [u^nu J_nu(j u)] = j u^nu J_{nu-1}(j u)`` with ``u = x^(1-a/2)``;
        ``slope_at_one_fd``: the same from a one-sided difference.
    """
    if not 1 <= n <= model.N:
        raise ValueError(f"mode {n} outside 1..{model.N}")
    a = model.a
    x = np.asarray(x_samples, dtype=float)
    lam = (2.0 - a) * model.zeros[n - 1]
    q = mode_function(model, n, x)
    d2 = (mode_function(model, n, x + h) - 2.0 * q + mode_function(model, n, x - h)) / h ** 2
    res = np.max(np.abs(d2 + lam ** 2 / (4.0 * x ** a) * q))
    j = model.zeros[n - 1]
    # dQ/dx = dQ/du du/dx with du/dx = (1 - a/2) at x = 1
    slope = j * bessel_j(model.nu - 1.0, j) * (1.0 - a / 2.0)
    fd = (3.0 * mode_function(model, n, 1.0) - 4.0 * mode_function(model, n, 1.0 - h)
          + mode_function(model, n, 1.0 - 2.0 * h)) / (2.0 * h)
    return {
        "residual": float(res),
        "q_near_zero": float(mode_function(model, n, 1e-12)),
        "slope_at_one": float(slope),
        "slope_at_one_fd": float(fd),
    }
