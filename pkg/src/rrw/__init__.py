"""Restricted random walker: exact first-return statistics, their Fourier-Bessel
continuum limit, and q-exponential fits."""

__version__ = "0.1.0"

from .chain import (
    WalkSpec,
    ProbState,
    ReturnSeries,
    MeanReturn,
    hop_probability,
    step_distribution,
    return_distribution,
    mean_return_exact,
    simulate_walkers,
)
from .specfun import bessel_j, bessel_zeros, orthogonality_integral
from .continuum import (
    ContinuumModel,
    coefficients,
    density,
    return_density,
    discrete_return,
    boundary_current,
)
from .qstats import (
    QFit,
    q_exponential,
    q_gaussian,
    estimate_q_tail,
    estimate_q_asymptotic,
    fit_beta,
    delta_area,
    delta_scan,
    synthetic_series,
)
