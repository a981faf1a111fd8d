"""Exception hierarchy.

Everything raised on purpose by the package derives from
:class:`GRCoincideError`, so callers (and the CLI) can separate numerical or
validation failures from programming errors.
"""

from __future__ import annotations


class GRCoincideError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GRCoincideError, ValueError):
    """Non-finite entries or otherwise malformed numeric input."""


class ShapeError(GRCoincideError, ValueError):
    pass


class RankDeficiencyError(GRCoincideError, ValueError):
    pass


class SymmetryError(GRCoincideError, ValueError):
    pass


class SingularSystemError(GRCoincideError, ArithmeticError):
    """A system that should be nonsingular was numerically singular."""


class PenaltyValidationError(GRCoincideError, ValueError):
    pass


class ModelDomainError(GRCoincideError, ValueError):
    """Covariance-model parameters outside their admissible region."""


class MissingDataError(GRCoincideError, ValueError):
    pass


class InconsistencyError(GRCoincideError):
    """Independent routes to the same verdict disagreed beyond tolerance.

    ``residuals`` carries every residual that went into the verdicts.
    """

    def __init__(self, message: str, residuals: dict[str, float]):
        super().__init__(message)
        self.residuals = dict(residuals)


class EstimationFailure(GRCoincideError):
    """A first-step parameter estimator did not converge.

    ``trace`` holds the ``(lower, upper)`` bracket after every iteration.
    """

    def __init__(self, message: str, trace: list[tuple[float, float]] | None = None):
        super().__init__(message)
        self.trace = list(trace or [])


class FormatError(GRCoincideError, ValueError):
    """Unparseable matrix, edge-list or config file; message has the line number."""


class SpecError(GRCoincideError, ValueError):
    """A textual matrix, penalty, model or config spec could not be interpreted."""
