"""q-exponentials, tail-slope estimates of q and the area discrepancy Delta."""

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy import optimize

from .chain import WalkSpec, ReturnSeries, return_distribution

__all__ = [
    "QFit",
    "FitError",
    "q_exponential",
    "q_gaussian",
    "q_exponential_tail",
    "TailEstimate",
    "estimate_q_tail",
    "estimate_q_asymptotic",
    "default_tail_window",
    "local_slopes",
    "fit_beta",
    "fit_residual",
    "synthetic_series",
    "delta_area",
    "delta_scan",
    "ScanRow",
]

Q_ONE_TOL = 1e-8


class FitError(RuntimeError):
    """A tail estimate or fit could not be carried out on the given series."""


def q_exponential(q, u):
    """``exp_q(u) = [1 + (1-q) u]^(1/(1-q))`` where the bracket is nonnegative, else 0.

    Reduces to ``exp(u)`` for ``|q - 1| < 1e-8``.  Broadcasts over arrays.
    """
    u = np.asarray(u, dtype=float)
    if abs(q - 1.0) < Q_ONE_TOL:
        out = np.exp(u)
    else:
        base = 1.0 + (1.0 - q) * u
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.where(base >= 0.0, np.abs(base) ** (1.0 / (1.0 - q)), 0.0)
        # q > 1 with base == 0 is a pole, not a cutoff
        if q > 1.0:
            out = np.where(base == 0.0, np.inf, out)
    return float(out) if out.ndim == 0 else out


def q_gaussian(q, B, u):
    """Unnormalised q-Gaussian ``exp_q(-B u^2)``."""
    return q_exponential(q, -B * np.square(np.asarray(u, dtype=float)))


def q_exponential_tail(q, beta, s, mass=1.0):
    """Normalised decaying q-exponential ``beta (2-q) mass exp_q(-beta s)``.

    For ``1 < q < 2`` the integral of ``exp_q(-beta s)`` over ``s >= 0`` is
    ``1 / (beta (2 - q))``, so the curve carries total mass ``mass``.
    """
    return beta * (2.0 - q) * mass * q_exponential(q, -beta * np.asarray(s, dtype=float))


@dataclass
class TailEstimate:
    q: float
    slope: float
    slope_stderr: float
    window: tuple
    n_points: int
    method: str = "power"
    beta_q: float = float("nan")
    iterations: int = 0


def _log_samples(lo, hi, n=200):
    s = np.unique(np.round(np.geomspace(lo, hi, n)).astype(np.int64))
    return s[(s >= lo) & (s <= hi)]


def local_slopes(series, lo=1, hi=None, n=400, width=0.25):
    """Log-log slope of the series over sliding windows ``width`` decades wide.

    Returns ``(s_mid, slope)`` on a logarithmic grid between ``lo`` and ``hi``.
    """
    hi = series.s_max if hi is None else hi
    s = _log_samples(lo, hi, n)
    p = series.at(s)
    ok = p > 0
    s, ls, lp = s[ok], np.log10(s[ok]), np.log10(p[ok])
    k = np.searchsorted(ls, ls + width)
    valid = k < len(ls)
    i = np.nonzero(valid)[0]
    slope = (lp[k[i]] - lp[i]) / (ls[k[i]] - ls[i])
    mid = np.sqrt(s[i] * s[k[i]])
    return mid, slope


def default_tail_window(series, floor=1e-10, tolerance=0.05):
    """Power-law plateau between the early transient and the finite-size cutoff.

    The log-log slope grows in magnitude through the transient, settles on
    the power law, then reverses briefly when the reflecting wall is first
    felt, before the exponential cutoff.  The window ends at that first local
    extremum of the slope (or where ``p_r`` drops below ``floor``) and starts
    where the slope first comes within ``tolerance`` of its end value, but
    not before ``max(10, L/10)``.
    """
    L = series.spec.L if series.spec is not None else 100
    lo0 = max(10, L // 10)
    pos = np.nonzero(series.p_r > floor)[0]
    if len(pos) == 0:
        raise FitError("series never exceeds the floor")
    hi0 = int(pos[-1]) + 1
    if hi0 <= 4 * lo0:
        raise FitError(f"no room for a tail window above s={lo0}")
    mid, slope = local_slopes(series, lo0, hi0)
    if len(slope) < 10:
        raise FitError("too few points to locate the power-law plateau")
    # smooth over a few grid points so lattice noise cannot fake an extremum
    sm = np.convolve(slope, np.ones(5) / 5, mode="valid")
    mids = mid[2:-2]
    rising = np.nonzero(np.diff(sm) > 0)[0]
    k_end = int(rising[0]) if len(rising) else len(sm) - 1
    m_end = sm[k_end]
    close = np.nonzero(np.abs(sm[: k_end + 1] - m_end) <= tolerance * abs(m_end))[0]
    k_start = int(close[0])
    lo = max(lo0, int(mids[k_start]))
    hi = min(hi0, int(mids[k_end]))
    if hi <= lo * 1.5:
        raise FitError(f"power-law plateau too short: [{lo}, {hi}]")
    return lo, hi


def estimate_q_tail(series, window=None, n_samples=200):
    """Least-squares log-log tail slope ``m``; returns ``q = 1 + 1/|m|``.

    Parameters
    ----------
    series : ReturnSeries
    window : (int, int), optional
        Inclusive step range.  Defaults to :func:`default_tail_window`.
    n_samples : int
        Number of logarithmically spaced steps drawn from the window.

    Raises
    ------
    FitError
        Fewer than 10 usable points, or a nonnegative slope.
    """
    if window is None:
        window = default_tail_window(series)
    lo, hi = int(window[0]), int(window[1])
    if lo < 1 or hi > series.s_max or hi <= lo:
        raise FitError(f"window {window} outside 1..{series.s_max}")
    s = _log_samples(lo, hi, n_samples)
    p = series.at(s)
    ok = p > 0
    if ok.sum() < 10:
        raise FitError(f"only {ok.sum()} usable points in window {window}")
    x, y = np.log(s[ok]), np.log(p[ok])
    res = _linfit(x, y)
    slope, stderr = res
    if slope >= 0:
        raise FitError(f"nonnegative tail slope {slope:.3g}; no power-law tail")
    return TailEstimate(1.0 + 1.0 / abs(slope), slope, stderr, (lo, hi), int(ok.sum()))


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(1, len(x) - 2)
    s2 = resid @ resid / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return float(coef[0]), float(math.sqrt(cov[0, 0]))


def estimate_q_asymptotic(series, window=None, fit_window=None, n_samples=200,
                          tol=1e-10, maxiter=100, mass=None):
    """Asymptotic tail slope consistent with a q-exponential shape.

    ``exp_q(-beta s)`` is an exact power law in ``s + s0`` with
    ``s0 = 1 / ((q-1) beta)``, whereas its slope against ``log s`` only
    approaches ``-1/(q-1)`` for ``beta s >> 1``; a plain log-log fit over a
    finite window is therefore biased towards larger q.  Starting from the
    plain estimate this alternates

    1. ``beta`` from :func:`fit_beta` at the current q over ``fit_window``;
    2. least-squares slope of ``log p_r`` against ``log(s + s0)`` over the
       tail window, ``q = 1 + 1/|slope|``;

    until q changes by less than ``tol``.

    Parameters
    ----------
    window : (int, int), optional
        Tail window; defaults to :func:`default_tail_window`.
    fit_window : (int, int), optional
        Window for the beta fit; defaults to ``(1, window[1])`` so the
        finite-size cutoff beyond the tail window does not pull on beta.
    mass : float, optional
        Known total mass for the beta fit (see :func:`fit_beta`).
    """
    first = estimate_q_tail(series, window, n_samples)
    lo, hi = first.window
    if fit_window is None:
        fit_window = (1, hi)
    s = _log_samples(lo, hi, n_samples)
    p = series.at(s)
    ok = p > 0
    s, lp = s[ok].astype(float), np.log(p[ok])
    q = first.q
    for it in range(1, maxiter + 1):
        if not 1.0 < q < 2.0:
            raise FitError(f"tail iteration left 1 < q < 2 (q={q:.4g})")
        fit = fit_beta(series, q, window=fit_window, mass=mass)
        s0 = 1.0 / ((q - 1.0) * fit.beta_q)
        slope, stderr = _linfit(np.log(s + s0), lp)
        if slope >= 0:
            raise FitError("nonnegative shifted tail slope")
        q_new = 1.0 + 1.0 / abs(slope)
        if abs(q_new - q) < tol:
            q = q_new
            break
        q = q_new
    else:
        raise FitError(f"asymptotic q did not settle in {maxiter} iterations")
    beta = fit_beta(series, q, window=fit_window, mass=mass).beta_q
    return TailEstimate(q, slope, stderr, (lo, hi), len(s), method="asymptotic",
                        beta_q=beta, iterations=it)


@dataclass
class QFit:
    q: float
    beta_q: float
    amplitude: float
    fit_window: tuple
    delta: float = float("nan")
    residual: float = float("nan")
    mass: float = 1.0

    def curve(self, s):
        return self.amplitude * q_exponential(self.q, -self.beta_q * np.asarray(s, dtype=float))

    def as_dict(self):
        return asdict(self)


def fit_residual(series, q, beta, window=None, n_samples=400, mass=None):
    """Mean squared log residual of ``beta (2-q) mass exp_q(-beta s)`` against the series."""
    s, lp, mass = _fit_points(series, window, n_samples, mass)
    return float(np.mean((lp - _log_model(q, beta, s, mass)) ** 2))


def _fit_points(series, window, n_samples, mass):
    lo, hi = window if window is not None else (1, series.s_max)
    s = _log_samples(int(lo), int(hi), n_samples)
    p = series.at(s)
    ok = p > 0
    if ok.sum() < 3:
        raise FitError("too few positive points to fit")
    if mass is None:
        mass = series.captured_mass
    return s[ok].astype(float), np.log(p[ok]), mass


def _log_model(q, beta, s, mass):
    # log(beta (2-q) mass) + log exp_q(-beta s), written for 1 < q < 2
    return (math.log(beta * (2.0 - q) * mass)
            + np.log1p((q - 1.0) * beta * s) / (1.0 - q))


def synthetic_series(q, beta, s_max, mass=1.0):
    """``beta (2-q) mass exp_q(-beta s)`` for ``s = 1..s_max`` as a :class:`ReturnSeries`."""
    s = np.arange(1, int(s_max) + 1, dtype=float)
    return ReturnSeries(q_exponential_tail(q, beta, s, mass), None,
                        meta={"method": "synthetic", "q": q, "beta": beta, "mass": mass})


def fit_beta(series, q, window=None, n_samples=400, mass=None):
    """One-parameter fit of ``beta`` with the amplitude tied to normalisation.

    The model is ``beta (2-q) M exp_q(-beta s)`` with ``M`` the series'
    captured mass unless a known total ``mass`` is given, so ``beta`` is
    the only free parameter.  The objective is
    the mean squared log residual over ``n_samples`` logarithmically spaced
    steps of ``window`` (default: the whole horizon), minimised over
    ``log beta`` by bounded Brent search after a coarse grid bracket.
    """
    if not 1.0 < q < 2.0:
        raise FitError(f"fit_beta needs 1 < q < 2, got {q}")
    if mass is None and series.captured_mass <= 0.9:
        raise FitError(f"captured mass {series.captured_mass:.4f} too small to normalise")
    s, lp, mass = _fit_points(series, window, n_samples, mass)

    def obj(logb):
        return float(np.mean((lp - _log_model(q, math.exp(logb), s, mass)) ** 2))

    grid = np.linspace(math.log(1e-3 / s[-1]), math.log(10.0 / s[0]), 121)
    vals = np.array([obj(g) for g in grid])
    k = int(np.argmin(vals))
    if k == 0 or k == len(grid) - 1:
        raise FitError("beta minimum at the edge of the search range")
    res = optimize.minimize_scalar(obj, bounds=(grid[k - 1], grid[k + 1]), method="bounded",
                                   options={"xatol": 1e-10})
    if not res.success:
        raise FitError(f"beta minimisation failed: {res.message}")
    beta = math.exp(res.x)
    lo, hi = window if window is not None else (1, series.s_max)
    return QFit(q=float(q), beta_q=beta, amplitude=beta * (2.0 - q) * mass,
                fit_window=(int(lo), int(hi)), residual=float(res.fun), mass=mass)


def delta_area(series, fit, chunk=1 << 22):
    """``sum_s |p_r(s) - fit(s)|`` over the full computed horizon."""
    total = 0.0
    n = series.s_max
    for start in range(0, n, chunk):
        s = np.arange(start + 1, min(n, start + chunk) + 1, dtype=float)
        total += float(np.abs(series.p_r[start:start + len(s)] - fit.curve(s)).sum())
    return total


@dataclass
class ScanRow:
    a: float
    L: int
    s_max: int
    q: float = float("nan")
    q_power: float = float("nan")
    beta_q: float = float("nan")
    delta: float = float("nan")
    captured_mass: float = float("nan")
    tail_lo: int = 0
    tail_hi: int = 0
    error: str = ""

    @property
    def ok(self):
        return not self.error


def _scan_one(a, L, horizon_mult, q_fixed, tail_from, q_method):
    s_max = int(round(horizon_mult * L * L))
    row = ScanRow(a=a, L=L, s_max=s_max)
    try:
        spec = WalkSpec(a, L)
        tf = None if tail_from is None else int(tail_from * L * L)
        series = return_distribution(spec, s_max, tail_from=tf)
        row.captured_mass = series.captured_mass
        window = default_tail_window(series)
        row.tail_lo, row.tail_hi = window
        plain = estimate_q_tail(series, window)
        row.q_power = plain.q
        if q_method == "asymptotic":
            row.q = estimate_q_asymptotic(series, window).q
        elif q_method == "power":
            row.q = plain.q
        else:
            raise ValueError(f"unknown q_method {q_method!r}")
        q = row.q if q_fixed is None else q_fixed
        fit = fit_beta(series, q, window=(1, window[1]))
        row.beta_q = fit.beta_q
        row.delta = delta_area(series, fit)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def delta_scan(a, L_list, horizon_mult=10.0, q_fixed=None, tail_from=0.1,
               q_method="asymptotic", workers=1):
    """Run chain -> tail q -> beta fit -> Delta for each size in ``L_list``.

    Parameters
    ----------
    a : float
    L_list : sequence of int
        Strictly increasing system sizes.
    horizon_mult : float
        ``s_max = horizon_mult * L**2``.
    q_fixed : float, optional
        Impose this q in the fit instead of the per-series tail estimate
        (the estimate is still reported).
    tail_from : float or None
        Iterate exactly up to ``tail_from * L**2`` steps and use the slow-mode
        expansion beyond (see :func:`rrw.chain.return_distribution`);
        ``None`` iterates the whole horizon.
    q_method : {"asymptotic", "power"}
        Tail estimator for q: :func:`estimate_q_asymptotic` or the plain
        log-log slope of :func:`estimate_q_tail`.  Both are reported.
    workers : int
        Rows run in a process pool when > 1; output order follows ``L_list``.

    Returns
    -------
    list of ScanRow
        Failed rows carry an ``error`` message and NaN numbers; later rows
        still run.

    Notes
    -----
    beta is fitted over ``[1, tail_hi]``: past the power-law window the
    series falls off exponentially and a q-exponential cannot follow it, so
    including those decades only drags beta away from the bulk of the mass.
    Delta is still summed over the whole horizon.
    """
    L_list = [int(L) for L in L_list]
    if any(b <= a_ for a_, b in zip(L_list, L_list[1:])):
        raise ValueError("L_list must be strictly increasing")
    args = [(float(a), L, float(horizon_mult), q_fixed, tail_from, q_method) for L in L_list]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_scan_one, *zip(*args)))
    return [_scan_one(*x) for x in args]
