"""Rank, null spaces, projectors and column-space tests.

All routines take plain ``numpy`` arrays and a :class:`Tolerances` bundle.
They are pure functions and hold no state.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
import scipy.linalg as sla

from .errors import InvalidInputError, RankDeficiencyError, ShapeError, SymmetryError

__all__ = [
    "Tolerances",
    "DEFAULT_TOL",
    "as_matrix",
    "max_norm",
    "stack",
    "numerical_rank",
    "null_space_basis",
    "column_basis",
    "orthogonal_projector",
    "Inclusion",
    "col_space_subset",
    "col_space_subset_by_rank",
    "col_space_equal",
    "is_psd",
    "is_pd",
    "symmetric_part",
]

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class Tolerances:
    """Numerical cutoffs shared by every test in the package.

    ``rank_rtol=None`` means ``max(rows, cols) * eps`` for whichever matrix
    is being ranked.
    """

    rank_rtol: float | None = None
    residual_atol: float = 1e-10
    psd_atol: float = 1e-10

    def __post_init__(self):
        for name in ("rank_rtol", "residual_atol", "psd_atol"):
            value = getattr(self, name)
            if value is None and name == "rank_rtol":
                continue
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} must be positive and finite, got {value!r}")

    def rank_cutoff(self, shape: tuple[int, ...]) -> float:
        if self.rank_rtol is not None:
            return self.rank_rtol
        return max(shape) * _EPS


DEFAULT_TOL = Tolerances()


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D float64 array (vectors become columns)."""
    A = np.asarray(M, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {A.ndim}-D")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return A


def max_norm(M) -> float:
    A = np.asarray(M, dtype=np.float64)
    return float(np.max(np.abs(A))) if A.size else 0.0


def stack(top, bottom) -> np.ndarray:
    """Vertical block ``(top; bottom)``; a scalar ``0`` bottom means zeros."""
    top = as_matrix(top, "top block")
    if np.isscalar(bottom) and bottom == 0:
        bottom = np.zeros((top.shape[1], top.shape[1]))
    bottom = as_matrix(bottom, "bottom block")
    if top.shape[1] != bottom.shape[1]:
        raise ShapeError(f"cannot stack {top.shape} over {bottom.shape}")
    return np.vstack([top, bottom])


def _svd(A: np.ndarray):
    # gesdd occasionally fails to converge; gesvd is the slower fallback.
    try:
        return sla.svd(A, full_matrices=True, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        return sla.svd(A, full_matrices=True, lapack_driver="gesvd")


def _rank_from_singular_values(s: np.ndarray, shape, tol: Tolerances) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol.rank_cutoff(shape) * s[0]))


def numerical_rank(M, tol: Tolerances = DEFAULT_TOL) -> int:
    """Number of singular values above ``rank_rtol * sigma_max``."""
    A = as_matrix(M)
    s = sla.svdvals(A)
    return _rank_from_singular_values(s, A.shape, tol)


def null_space_basis(X, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis ``Z`` (n x (n-k)) of the orthogonal complement of C(X).

    The basis comes from the trailing left singular vectors of ``X``, so the
    result is deterministic for a given input.
    """
    X = as_matrix(X, "X")
    n, k = X.shape
    if n <= k:
        raise ShapeError(f"need n > k for a null-space basis, got {n}x{k}")
    U, s, _ = _svd(X)
    r = _rank_from_singular_values(s, X.shape, tol)
    if r < k:
        raise RankDeficiencyError(f"X has numerical rank {r} < {k}")
    return np.ascontiguousarray(U[:, k:])


def column_basis(M, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of C(M); shape ``(rows, rank)``."""
    A = as_matrix(M)
    U, s, _ = _svd(A)
    r = _rank_from_singular_values(s, A.shape, tol)
    return np.ascontiguousarray(U[:, :r])


def orthogonal_projector(M, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    U = column_basis(M, tol)
    return U @ U.T


@dataclass(frozen=True)
class Inclusion:
    """Outcome of a column-space test.

    ``witness`` is ``G`` with ``A ~= B @ G`` (None when the test failed).
    ``witness_smin`` is the smallest singular value of ``G`` and is only
    filled in by :func:`col_space_equal` when both sides have full rank.
    """

    holds: bool
    residual: float
    witness: np.ndarray | None = None
    witness_residual: float | None = None
    witness_smin: float | None = None

    def __bool__(self) -> bool:
        return self.holds


def _check_rows(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape[0] != B.shape[0]:
        raise ShapeError(f"row counts differ: {A.shape[0]} vs {B.shape[0]}")


def col_space_subset(A, B, tol: Tolerances = DEFAULT_TOL) -> Inclusion:
    """Test C(A) within C(B) through the residual ``(I - P_B) A``."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    _check_rows(A, B)
    U = column_basis(B, tol)
    resid = A - U @ (U.T @ A)
    r = max_norm(resid)
    if r > tol.residual_atol:
        return Inclusion(False, r)
    G = sla.lstsq(B, A, lapack_driver="gelsd")[0]
    return Inclusion(True, r, G, max_norm(A - B @ G))


def col_space_subset_by_rank(A, B, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Secondary test: ``rank([B A]) == rank(B)``."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    _check_rows(A, B)
    return numerical_rank(np.hstack([B, A]), tol) == numerical_rank(B, tol)


def col_space_equal(A, B, tol: Tolerances = DEFAULT_TOL) -> Inclusion:
    """Test C(A) == C(B) for same-shape ``A`` and ``B``.

    The witness solves ``A = B G``; its smallest singular value certifies
    nonsingularity when both matrices have full column rank.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape != B.shape:
        raise ShapeError(f"shapes differ: {A.shape} vs {B.shape}")
    fwd = col_space_subset(A, B, tol)
    back = col_space_subset(B, A, tol)
    residual = max(fwd.residual, back.residual)
    if not (fwd.holds and back.holds):
        return Inclusion(False, residual)
    smin = None
    if numerical_rank(A, tol) == A.shape[1] == numerical_rank(B, tol):
        smin = float(sla.svdvals(fwd.witness)[-1])
    return Inclusion(True, residual, fwd.witness, fwd.witness_residual, smin)


def symmetric_part(M, tol: Tolerances = DEFAULT_TOL, name: str = "matrix") -> np.ndarray:
    """``(M + M^T) / 2`` after checking that ``M`` is square and symmetric."""
    A = as_matrix(M, name)
    if A.shape[0] != A.shape[1]:
        raise ShapeError(f"{name} must be square, got {A.shape}")
    asym = max_norm(A - A.T)
    if asym > tol.residual_atol * max(1.0, max_norm(A)):
        raise SymmetryError(f"{name} is not symmetric (max asymmetry {asym:.3g})")
    return 0.5 * (A + A.T)


def _min_eigenvalue(M, tol: Tolerances) -> float:
    S = symmetric_part(M, tol)
    if S.size == 0:
        return math.inf
    return float(sla.eigvalsh(S, subset_by_index=[0, 0])[0])


def is_psd(M, tol: Tolerances = DEFAULT_TOL) -> bool:
    return _min_eigenvalue(M, tol) >= -tol.psd_atol


def is_pd(M, tol: Tolerances = DEFAULT_TOL) -> bool:
    return _min_eigenvalue(M, tol) > tol.psd_atol
