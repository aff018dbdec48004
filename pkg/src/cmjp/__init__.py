"""Regime-switching conditional Markov jump processes.

Simulation (conditional and mixture constructions), EM estimation with
closed-form updates, observed and expected Fisher information, asymptotic
covariance checks, and a Monte Carlo study harness.
"""

from .em import FitConfig, FitResult, aic, em_step, fit, init_params, select_model
from .exceptions import (
    CmjpError,
    DegeneratePosteriorError,
    EstimationError,
    NumericalError,
    SingularMatrixError,
    ValidationError,
)
from .inference import (
    FisherMatrix,
    StudyReport,
    asymptotic_covariance,
    cramer_rao,
    expected_fisher_complete,
    ks_normal_test,
    monte_carlo_study,
    observed_fisher,
    observed_score,
    standard_errors,
)
from .likelihood import (
    alpha_mle,
    conditional_transition,
    holding_survival,
    joint_jump,
    observed_loglik,
    posterior_weights,
    regime_logliks,
    switching_posterior,
)
from .matcore import invert, mat_exp, principal_sqrt, van_loan_integral
from .model import (
    ModelParams,
    Path,
    SufficientStats,
    embedded_chain,
    from_vector,
    param_dim,
    param_names,
    path_stats,
    to_vector,
    validate_model,
)
from .presets import three_regime_benchmark, two_regime_benchmark
from .simulate import (
    RngStream,
    SimulatedPath,
    sample_categorical,
    simulate_conditional,
    simulate_mixture,
    simulate_paths,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
