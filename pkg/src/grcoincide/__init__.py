"""Decide when a general ridge estimator does not depend on the error covariance.

``beta_GR(Phi, K) = (X' Phi^-1 X + K)^-1 X' Phi^-1 y``.  The package tests
whether ``beta_GR(Omega, K) == beta_GR(I, K)`` for every ``y``, for explicit
covariances and for structured models (mixed effects, SUR, spatial SAR/SMA,
serial correlation), and simulates what a two-step estimator of ``Omega``
costs when the answer is yes.
"""

from .equivalence import (
    CrossValidation,
    EquivalenceVerdict,
    column_space_check,
    cross_validate,
    decompose_omega,
    decomposition_check,
    pd_shortcut_check,
)
from .errors import (
    EstimationFailure,
    FormatError,
    GRCoincideError,
    InconsistencyError,
    InvalidInputError,
    MissingDataError,
    ModelDomainError,
    PenaltyValidationError,
    RankDeficiencyError,
    ShapeError,
    SingularSystemError,
    SpecError,
    SymmetryError,
)
from .linalg import DEFAULT_TOL, Tolerances, col_space_equal, col_space_subset, null_space_basis, numerical_rank
from .models import (
    ConditionVerdict,
    ExplicitModel,
    RaoModel,
    Sar1Model,
    SerialModel,
    Sma1Model,
    SurModel,
    build_omega,
    parameter_free_check,
    rao_check,
    serial_check,
    spatial_all_rho_check,
    spatial_all_rho_equations,
    spatial_single_rho_check,
    spatial_sufficient_check,
    spatial_two_point_check,
    sur_check,
)
from .ridge import GlmInstance, Penalty, estimators_coincide, gr_estimate, gr_hat_operator, materialize_penalty
from .twostep import McConfig, McReport, run_monte_carlo, sample_errors, two_step_estimate
from .weights import ContiguityMatrix, WeightMatrix, counterexample_instance, row_normalize

__version__ = "0.1.0"
