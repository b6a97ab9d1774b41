"""Randomized quasi-Monte Carlo importance sampling for Gaussian integrals.

Scrambled Sobol' nets, Gaussian and Student-t importance-sampling
estimators, automatic ODIS/Laplace proposal construction, the eigenvalue
diagnostic for QMC-friendliness of the likelihood ratio, positivization for
signed integrands, and an RMSE convergence-rate experiment harness.
"""

from rqmcis.digital_nets import (
    NetSpec,
    PointSet,
    elementary_interval_histogram,
    owen_scramble,
    sobol_net,
)
from rqmcis.estimators import (
    EstimateRequest,
    RmseTable,
    fit_slope,
    is_quadrature,
    ratio_estimate,
    rmse_experiment,
    t_is_quadrature,
)
from rqmcis.is_core import (
    BgcDiagnostic,
    GaussianMeasure,
    Proposal,
    bgc_eigen_diagnostic,
    log_lr_gaussian,
    log_lr_t,
    root_from_cov,
    rotate_root,
)
from rqmcis.positivization import PositivizationParams, positivized_estimate, v_minus, v_plus
from rqmcis.proposals import (
    Integrand,
    ModeResult,
    build_laplace,
    build_odis,
    build_prior,
    find_mode,
    laplace_cov,
    to_student_t,
)
from rqmcis.transforms import (
    GammaParams,
    inv_lower_inc_gamma,
    inv_norm_cdf,
    lower_inc_gamma,
    psi_map,
    tau_map,
)

__version__ = "0.1.0"
