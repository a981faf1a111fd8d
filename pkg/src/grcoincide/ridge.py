"""General ridge estimators ``(X' Phi^-1 X + K)^-1 X' Phi^-1 y``.

The estimator is linear in ``y``; :func:`gr_hat_operator` returns the
``k x n`` matrix ``H`` with ``beta_hat = H @ y``.  Two estimators agree for
every ``y`` exactly when their hat operators agree, which is what
:func:`estimators_coincide` checks.  That comparison is the reference every
algebraic condition in :mod:`grcoincide.equivalence` and
:mod:`grcoincide.models` is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
import scipy.linalg as sla

from .errors import (
    InvalidInputError,
    MissingDataError,
    PenaltyValidationError,
    RankDeficiencyError,
    ShapeError,
    SingularSystemError,
)
from .linalg import DEFAULT_TOL, Tolerances, as_matrix, is_pd, is_psd, max_norm, numerical_rank, symmetric_part

__all__ = [
    "Penalty",
    "GlmInstance",
    "materialize_penalty",
    "gr_hat_operator",
    "gr_estimate",
    "Coincidence",
    "estimators_coincide",
]

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class Penalty:
    """Recipe for the penalty matrix ``K``.

    ``kind`` is one of ``zero``, ``ridge`` (``lam * I``), ``shrinkage``
    (``delta * X' Phi^-1 X``) or ``custom`` (a stored matrix).
    """

    kind: str = "zero"
    value: float | None = None
    matrix: np.ndarray | None = None

    KINDS = ("zero", "ridge", "shrinkage", "custom")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise PenaltyValidationError(f"unknown penalty kind {self.kind!r}")
        if self.kind in ("ridge", "shrinkage"):
            if self.value is None or not math.isfinite(self.value) or self.value <= 0:
                raise PenaltyValidationError(f"{self.kind} penalty needs a positive constant, got {self.value!r}")
        if self.kind == "custom" and self.matrix is None:
            raise PenaltyValidationError("custom penalty needs a matrix")

    @classmethod
    def zero(cls) -> Penalty:
        return cls("zero")

    @classmethod
    def ridge(cls, lam: float) -> Penalty:
        return cls("ridge", float(lam))

    @classmethod
    def shrinkage(cls, delta: float) -> Penalty:
        return cls("shrinkage", float(delta))

    @classmethod
    def custom(cls, K) -> Penalty:
        return cls("custom", None, as_matrix(K, "K"))

    def describe(self) -> str:
        if self.kind == "ridge":
            return f"ridge:{self.value!r}"
        if self.kind == "shrinkage":
            return f"shrink:{self.value!r}"
        return self.kind


def _chol(M: np.ndarray, name: str):
    try:
        return sla.cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise InvalidInputError(f"{name} is not positive definite") from exc


def _phi_inv(Phi, n: int, tol: Tolerances):
    """Cholesky factor of ``Phi`` (None stands for the identity)."""
    if Phi is None:
        return None
    Phi = symmetric_part(Phi, tol, "Phi")
    if Phi.shape != (n, n):
        raise ShapeError(f"Phi must be {n}x{n}, got {Phi.shape}")
    return _chol(Phi, "Phi")


def materialize_penalty(p: Penalty, X, Phi=None, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """The ``k x k`` matrix ``K`` described by ``p``."""
    X = as_matrix(X, "X")
    n, k = X.shape
    if p.kind == "zero":
        return np.zeros((k, k))
    if p.kind == "ridge":
        return p.value * np.eye(k)
    if p.kind == "shrinkage":
        cho = _phi_inv(Phi, n, tol)
        PX = X if cho is None else sla.cho_solve(cho, X)
        G = X.T @ PX
        return p.value * 0.5 * (G + G.T)
    K = as_matrix(p.matrix, "K")
    if K.shape != (k, k):
        raise PenaltyValidationError(f"K must be {k}x{k}, got {K.shape}")
    try:
        ok = is_psd(K, tol)
    except Exception as exc:
        raise PenaltyValidationError(f"K rejected: {exc}") from exc
    if not ok:
        raise PenaltyValidationError("K is not positive semidefinite")
    return 0.5 * (K + K.T)


def gr_hat_operator(X, Phi, K, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """``H(Phi, K) = (X' Phi^-1 X + K)^-1 X' Phi^-1`` via two Cholesky solves.

    ``Phi=None`` is the identity.  Never forms an explicit inverse.
    """
    X = as_matrix(X, "X")
    n, k = X.shape
    K = as_matrix(K, "K")
    if K.shape != (k, k):
        raise ShapeError(f"K must be {k}x{k}, got {K.shape}")
    cho = _phi_inv(Phi, n, tol)
    PX = X if cho is None else sla.cho_solve(cho, X, check_finite=False)
    M = X.T @ PX + K
    M = 0.5 * (M + M.T)
    w = sla.eigvalsh(M)
    if w[-1] <= 0 or w[0] <= k * _EPS * w[-1]:
        raise SingularSystemError(
            f"X' Phi^-1 X + K is numerically singular (eigenvalues {w[0]:.3g} .. {w[-1]:.3g})"
        )
    cM = _chol(M, "X' Phi^-1 X + K")
    return sla.cho_solve(cM, PX.T, check_finite=False)


@dataclass
class GlmInstance:
    """One instance of ``y = X beta + eps`` with ``Cov(eps) = sigma2 * Omega``.

    ``sigma2`` is carried for simulation only; it cancels in every point
    estimate.
    """

    X: np.ndarray
    Omega: np.ndarray
    y: np.ndarray | None = None
    sigma2: float | None = None
    tol: Tolerances = DEFAULT_TOL

    def __post_init__(self):
        self.X = as_matrix(self.X, "X")
        n, k = self.X.shape
        if numerical_rank(self.X, self.tol) != k:
            raise RankDeficiencyError("X must have full column rank")
        self.Omega = as_matrix(self.Omega, "Omega")
        if self.Omega.shape != (n, n):
            raise ShapeError(f"Omega must be {n}x{n}, got {self.Omega.shape}")
        if not is_pd(self.Omega, self.tol):
            raise InvalidInputError("Omega must be positive definite")
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
            if self.y.shape != (n,):
                raise ShapeError(f"y must have length {n}, got {self.y.shape[0]}")
        if self.sigma2 is not None and not self.sigma2 > 0:
            raise InvalidInputError("sigma2 must be positive")


def gr_estimate(inst: GlmInstance, Phi, K, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """``H(Phi, K) @ y`` for the instance's response."""
    if inst.y is None:
        raise MissingDataError("the instance has no response vector y")
    return gr_hat_operator(inst.X, Phi, K, tol) @ inst.y


@dataclass(frozen=True)
class Coincidence:
    """``residual`` is ``max|H(Omega,K) - H(I,K)| / max|H(I,K)|``."""

    equal: bool
    residual: float
    H_omega: np.ndarray
    H_identity: np.ndarray

    def __bool__(self) -> bool:
        return self.equal


def estimators_coincide(X, Omega, K, tol: Tolerances = DEFAULT_TOL) -> Coincidence:
    """Decide whether ``beta_GR(Omega, K) == beta_GR(I, K)`` for every ``y``."""
    H1 = gr_hat_operator(X, Omega, K, tol)
    H0 = gr_hat_operator(X, None, K, tol)
    scale = max_norm(H0)
    r = max_norm(H1 - H0) / scale if scale > 0 else max_norm(H1)
    return Coincidence(r <= tol.residual_atol, r, H1, H0)
