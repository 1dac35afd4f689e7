"""lmopt: steepest descent over norm balls with inexact direction oracles.

The update rule is x+ = x + gamma * d where d approximately minimizes the
linear model <g, d> over the unit ball of a chosen norm.  The oracle may be
exact (sign/normalize/SVD) or an iterative polynomial approximation of the
matrix polar factor; its inexactness delta feeds directly into step-size
rules and convergence guarantees, both of which this package implements and
cross-checks empirically.
"""

from .core import NormKind, ParamBlock, as_matrix, dual_norm, norm_compat_rho, primal_norm
from .errors import (
    ConfigError,
    DegenerateGradient,
    InsufficientGrid,
    InvalidInexactness,
    LmoptError,
    MissingBlockPolicy,
    MissingCertificate,
    NonFiniteValue,
    ParseError,
    SchemeDiverged,
    ShapeMismatch,
)
from .lmo import (
    LmoResult,
    exact_lmo,
    lmo_euclidean_exact,
    lmo_linf_exact,
    lmo_spectral_approx,
    lmo_spectral_exact,
    measure_delta,
)
from .optimizer import (
    MomentumKind,
    MomentumPolicy,
    OptimizerConfig,
    OptimizerState,
    OracleSpec,
    RunResult,
    StepKind,
    StepPolicy,
    TraceRecord,
    adaptive_step_size,
    glsmooth_step_size,
    initial_state,
    momentum_update,
    run,
    step_deterministic,
    step_layerwise,
    step_stochastic,
)
from .polar import (
    MUON_QUINTIC_COEFFS,
    NEWTON_SCHULZ_COEFFS,
    ErrorModelParams,
    Normalization,
    PolarKind,
    PolarScheme,
    approx_polar,
    apriori_error_bound,
    load_coefficient_table,
    scheme_matmul_count,
)
from .problems import (
    BlockSpec,
    LogisticRegression,
    MatrixFactorization,
    MatrixQuadratic,
    Problem,
    QuarticWell,
    make_logistic,
    make_matrix_factorization,
    make_matrix_quadratic,
    make_quartic,
    stochastic_gradient,
)
from .theory import (
    BoundInputs,
    BoundReport,
    StochasticTuning,
    adaptive_bound_det,
    adaptive_rate_det,
    bound_det_constant,
    bound_det_general,
    bound_stochastic,
    complexity_det,
    complexity_glsmooth,
    complexity_layerwise,
    momentum_error_steady_state,
    optimal_gamma_det,
    optimal_params_stochastic,
    verify_bounds,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # core
    "NormKind", "ParamBlock", "as_matrix", "primal_norm", "dual_norm", "norm_compat_rho",
    # errors
    "LmoptError", "ShapeMismatch", "NonFiniteValue", "DegenerateGradient",
    "SchemeDiverged", "ParseError", "InvalidInexactness", "MissingBlockPolicy",
    "MissingCertificate", "InsufficientGrid", "ConfigError",
    # oracles
    "LmoResult", "exact_lmo", "lmo_spectral_exact", "lmo_linf_exact",
    "lmo_euclidean_exact", "lmo_spectral_approx", "measure_delta",
    "PolarKind", "Normalization", "PolarScheme", "ErrorModelParams",
    "NEWTON_SCHULZ_COEFFS", "MUON_QUINTIC_COEFFS", "approx_polar",
    "apriori_error_bound", "load_coefficient_table", "scheme_matmul_count",
    # problems
    "BlockSpec", "Problem", "MatrixQuadratic", "LogisticRegression",
    "MatrixFactorization", "QuarticWell", "make_matrix_quadratic",
    "make_logistic", "make_matrix_factorization", "make_quartic",
    "stochastic_gradient",
    # optimizer
    "StepKind", "StepPolicy", "MomentumKind", "MomentumPolicy", "OracleSpec",
    "OptimizerConfig", "OptimizerState", "TraceRecord", "RunResult",
    "momentum_update", "adaptive_step_size", "glsmooth_step_size",
    "initial_state", "run", "step_deterministic", "step_stochastic",
    "step_layerwise",
    # theory
    "BoundInputs", "BoundReport", "StochasticTuning", "bound_det_general",
    "bound_det_constant", "optimal_gamma_det", "complexity_det",
    "adaptive_bound_det", "adaptive_rate_det", "optimal_params_stochastic",
    "bound_stochastic", "momentum_error_steady_state", "complexity_glsmooth",
    "complexity_layerwise", "verify_bounds",
]
