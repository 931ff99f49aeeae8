"""Stochastic mirror descent with a Bregman notion of gradient-noise variance."""

from . import errors, gaussian, mirror, objective, smd, variance
from .errors import *  # noqa: F401,F403
from .mirror import (
    MirrorMap,
    bregman,
    bregman_dual,
    conj_bregman_direct,
    euclidean,
    gaussian_log_partition,
    neg_entropy,
    symmetrized_bregman,
    with_numerical_inverse,
)
from .objective import (
    StochasticObjective,
    finite_kl,
    finite_linear_simplex,
    finite_quadratic,
    gaussian_nll,
    relative_smoothness_check,
)
from .smd import ProxSpec, RunConfig, StepSchedule, Trace, det_step, prox_smd_step, run, run_replicas, smd_step
from .variance import (
    FEtaEstimator,
    limit_variance,
    minimize_f_eta,
    sigma_star_sq,
    variance_report,
)

__version__ = "0.1.0"
