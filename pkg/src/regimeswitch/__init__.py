"""
Maximum likelihood for Markov regime switching models.

Transition matrices may contain structural zeros, either imposed through a
mask or produced by expanding lagged-regime dependence into a first-order
chain on regime tuples.
"""

__version__ = "0.1.0"

from .chain import ExpandedChain, MinorizationConstants, expand, minorization, stationary
from .errors import *  # noqa: F401,F403
from .estimate import FitOptions, FitResult, fit, profile_refit
from .filtering import FilterOutput, SmoothOutput, forward_filter, loglik, smooth
from .inference import (
    CovarianceEstimate,
    ScoreReport,
    confidence_intervals,
    hessian_fd,
    louis_hessian_small,
    observed_hessian,
    opg,
    score_fd,
    score_louis,
)
from .kernels import BACKEND
from .model import (
    BounceBack,
    Distribution,
    EstimateXi,
    HamiltonAR,
    MSCDWeibull,
    ModelSpec,
    PointMass,
    SeriesData,
    SwitchingARCH,
    Theta,
    canonicalize,
    from_unconstrained,
    log_g,
    simulate,
    to_unconstrained,
)
from .montecarlo import CoverageReport, compare_ci_methods, coverage_experiment
from .theory import (
    MixingCheck,
    OmegaSeries,
    check_mixing_bound,
    conditional_filter_exact,
    forgetting_curve,
    omega_window,
)
