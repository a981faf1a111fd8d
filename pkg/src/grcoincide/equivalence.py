"""Exact conditions for ``beta_GR(Omega, K) == beta_GR(I, K)``.

Three independent routes decide the same question:

* :func:`decomposition_check` splits ``Omega`` along C(X) and its
  orthogonal complement, requires the cross block to vanish
  (``X' Omega Z = 0``) and the X-block ``Gamma`` to satisfy
  ``X'X Gamma K = K``;
* :func:`column_space_check` tests ``C((Omega X; K)) == C((X; K))``;
* :func:`grcoincide.ridge.estimators_coincide` compares hat operators.

:func:`cross_validate` runs all three and refuses to hide a disagreement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import warnings

import numpy as np
import scipy.linalg as sla

from .errors import InconsistencyError, RankDeficiencyError, ShapeError
from .linalg import (
    DEFAULT_TOL,
    Tolerances,
    as_matrix,
    col_space_equal,
    is_pd,
    max_norm,
    null_space_basis,
    numerical_rank,
    stack,
    symmetric_part,
)
from .ridge import estimators_coincide

__all__ = [
    "OmegaDecomposition",
    "EquivalenceVerdict",
    "decompose_omega",
    "decomposition_check",
    "column_space_check",
    "pd_shortcut_check",
    "fixed_design_residual",
    "CrossValidation",
    "cross_validate",
    "HYSTERESIS_BAND",
]

#: A verdict whose deciding residual lies within this factor of
#: ``residual_atol`` is treated as marginal by :func:`cross_validate`.
HYSTERESIS_BAND = 1e3


@dataclass(frozen=True)
class OmegaDecomposition:
    """``Omega = X Gamma X' + Z Delta Z' + X Xi Z' + Z Xi' X'``."""

    Gamma: np.ndarray
    Delta: np.ndarray
    Xi: np.ndarray
    Z_used: np.ndarray

    def recompose(self, X) -> np.ndarray:
        X = as_matrix(X, "X")
        Z = self.Z_used
        XXiZ = X @ self.Xi @ Z.T
        return X @ self.Gamma @ X.T + Z @ self.Delta @ Z.T + XXiZ + XXiZ.T


@dataclass(frozen=True)
class EquivalenceVerdict:
    equal: bool
    fired_condition: str
    certificates: dict[str, float | np.ndarray] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.equal

    def residuals(self) -> dict[str, float]:
        return {k: float(v) for k, v in self.certificates.items() if np.ndim(v) == 0}


def _prepare(Omega, X, tol: Tolerances):
    X = as_matrix(X, "X")
    n = X.shape[0]
    Omega = symmetric_part(Omega, tol, "Omega")
    if Omega.shape != (n, n):
        raise ShapeError(f"Omega must be {n}x{n}, got {Omega.shape}")
    rank = numerical_rank(X, tol)
    if rank < X.shape[1]:
        raise RankDeficiencyError(f"X has rank {rank} but {X.shape[1]} columns")
    return Omega, X


def _sandwich_solve(A: np.ndarray, M: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``A^-1 M B^-1`` for symmetric positive-definite ``A`` and ``B``."""
    left = sla.cho_solve(sla.cho_factor(A), M)
    return sla.cho_solve(sla.cho_factor(B), left.T).T


def decompose_omega(Omega, X, tol: Tolerances = DEFAULT_TOL, Z=None) -> OmegaDecomposition:
    """Coordinates of ``Omega`` in the (X, Z) basis.

    ``Z`` defaults to :func:`null_space_basis`; any full-rank ``Z`` with
    ``X'Z = 0`` may be passed instead.
    """
    Omega, X = _prepare(Omega, X, tol)
    if Z is None:
        Z = null_space_basis(X, tol)
    Z = as_matrix(Z, "Z")
    XtX = X.T @ X
    ZtZ = Z.T @ Z
    Gamma = _sandwich_solve(XtX, X.T @ Omega @ X, XtX)
    Delta = _sandwich_solve(ZtZ, Z.T @ Omega @ Z, ZtZ)
    Xi = _sandwich_solve(XtX, X.T @ Omega @ Z, ZtZ)
    return OmegaDecomposition(0.5 * (Gamma + Gamma.T), 0.5 * (Delta + Delta.T), Xi, Z)


def _rel(resid: np.ndarray, scale: float) -> float:
    r = max_norm(resid)
    return r / scale if scale > 0 else r


def decomposition_check(Omega, X, K, tol: Tolerances = DEFAULT_TOL, Z=None) -> EquivalenceVerdict:
    """Equality holds iff ``X' Omega Z = 0`` and ``X'X Gamma K = K``.

    The cross-term residual is scaled by ``|X| |Omega| |Z|`` (spectral norms)
    and the penalty residual by ``max|K|``.
    """
    Omega, X = _prepare(Omega, X, tol)
    K = as_matrix(K, "K")
    dec = decompose_omega(Omega, X, tol, Z)
    Z = dec.Z_used
    scale = np.linalg.norm(X, 2) * np.linalg.norm(Omega, 2) * np.linalg.norm(Z, 2)
    r_cross = _rel(X.T @ Omega @ Z, scale)
    r_penalty = _rel(X.T @ X @ dec.Gamma @ K - K, max_norm(K))
    equal = r_cross <= tol.residual_atol and r_penalty <= tol.residual_atol
    return EquivalenceVerdict(
        equal,
        "decomposition",
        {"cross_term": r_cross, "penalty_term": r_penalty, "Gamma": dec.Gamma},
    )


def column_space_check(Omega, X, K, tol: Tolerances = DEFAULT_TOL) -> EquivalenceVerdict:
    """Equality holds iff ``C((Omega X; K)) == C((X; K))``.

    On success the certificates carry ``G`` with ``Omega X = X G`` and
    ``K = K G`` plus its smallest singular value.
    """
    Omega, X = _prepare(Omega, X, tol)
    K = as_matrix(K, "K")
    A = stack(Omega @ X, K)
    B = stack(X, K)
    # column spaces are scale free; normalizing keeps the absolute cutoff meaningful
    res = col_space_equal(A / max_norm(A), B / max_norm(B), tol)
    certs: dict[str, float | np.ndarray] = {"column_space": res.residual}
    if res.holds:
        G = sla.lstsq(B, A)[0]
        OX = Omega @ X
        certs["omega_x_residual"] = _rel(OX - X @ G, max_norm(OX))
        certs["penalty_residual"] = _rel(K - K @ G, max_norm(K))
        certs["witness_smin"] = float(sla.svdvals(G)[-1])
        certs["G"] = G
    return EquivalenceVerdict(res.holds, "column_space", certs)


def fixed_design_residual(Omega, X) -> float:
    """``max|Omega X - X| / max|X|``."""
    X = as_matrix(X, "X")
    Omega = as_matrix(Omega, "Omega")
    return _rel(Omega @ X - X, max_norm(X))


def pd_shortcut_check(Omega, X, tol: Tolerances = DEFAULT_TOL) -> bool:
    """For positive-definite K only: equality holds iff ``Omega X = X``."""
    return fixed_design_residual(Omega, X) <= tol.residual_atol


@dataclass(frozen=True)
class CrossValidation:
    verdicts: dict[str, EquivalenceVerdict]
    agree: bool
    diagnostic: str | None = None

    @property
    def equal(self) -> bool:
        return self.verdicts["oracle"].equal

    def residuals(self) -> dict[str, float]:
        out = {}
        for name, v in self.verdicts.items():
            for key, value in v.residuals().items():
                out[f"{name}.{key}"] = value
        return out


_DECISIVE = {
    "decomposition": ("cross_term", "penalty_term"),
    "column_space": ("column_space",),
    "oracle": ("hat_gap",),
    "pd_shortcut": ("omega_x_minus_x",),
}


def _marginal(name: str, v: EquivalenceVerdict, tol: Tolerances, band: float) -> bool:
    rs = [float(v.certificates[key]) for key in _DECISIVE[name]]
    atol = tol.residual_atol
    if v.equal:
        return max(rs) >= atol / band
    return max(rs) <= atol * band


def cross_validate(
    Omega, X, K, tol: Tolerances = DEFAULT_TOL, band: float = HYSTERESIS_BAND
) -> CrossValidation:
    """Run every route and compare.

    A disagreement is tolerated (reported in ``diagnostic`` and as a
    ``RuntimeWarning``) only if the verdicts that are not marginal still
    agree.  A verdict is marginal when its deciding residual lies within a
    factor ``band`` of the cutoff, on the side it fell.  Otherwise
    :class:`InconsistencyError` is raised with all residuals attached.
    """
    Omega, X = _prepare(Omega, X, tol)
    K = as_matrix(K, "K")
    oracle = estimators_coincide(X, Omega, K, tol)
    verdicts = {
        "decomposition": decomposition_check(Omega, X, K, tol),
        "column_space": column_space_check(Omega, X, K, tol),
        "oracle": EquivalenceVerdict(oracle.equal, "oracle", {"hat_gap": oracle.residual}),
    }
    if is_pd(K, tol):
        r = fixed_design_residual(Omega, X)
        verdicts["pd_shortcut"] = EquivalenceVerdict(
            r <= tol.residual_atol, "pd_shortcut", {"omega_x_minus_x": r}
        )
    values = {v.equal for v in verdicts.values()}
    if len(values) == 1:
        return CrossValidation(verdicts, True)
    report = CrossValidation(verdicts, False)
    firm = {name: v.equal for name, v in verdicts.items() if not _marginal(name, v, tol, band)}
    if len(set(firm.values())) > 1:
        raise InconsistencyError(
            "equivalence checks disagree: "
            + ", ".join(f"{n}={v.equal}" for n, v in verdicts.items()),
            report.residuals(),
        )
    marginal = sorted(set(verdicts) - set(firm))
    msg = (
        "verdicts disagree near the tolerance cutoff ("
        + ", ".join(f"{n}={verdicts[n].equal}" for n in verdicts)
        + f"); marginal: {', '.join(marginal)}"
    )
    warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return CrossValidation(verdicts, False, msg)
