"""Structured covariance models and their parameter-free coincidence checks.

Each model describes ``Omega`` as a function of parameters, some of which
may be unknown (``None``).  The checkers below decide coincidence of
``beta_GR(Omega, K)`` and ``beta_GR(I, K)`` without ever touching the
unknown parameters.

=====================  ==================================  ==============
checker                model                               exact or
                                                           sufficient
=====================  ==================================  ==============
``rao_check``          ``I + X Gb X' + Z Db Z'``           exact
``sur_check``          ``Sigma (x) I_m``                   sufficient
``spatial_sufficient`` SAR(1) / SMA(1)                     sufficient
``spatial_all_rho``    SMA(1), every ``0 < |rho| < 1``     exact
``serial_check``       ``Omega^-1 = I + theta A``          sufficient
=====================  ==================================  ==============

The SAR(1) variant of ``spatial_all_rho_check`` replaces ``W W'`` with
``W' W``.  That swap is backed by the SAR argument for one direction only;
the converse is checked empirically in the test-suite and should be treated
as conjectural.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np
import scipy.linalg as sla

from .errors import InvalidInputError, ModelDomainError, ShapeError, SingularSystemError
from .linalg import (
    DEFAULT_TOL,
    Inclusion,
    Tolerances,
    as_matrix,
    col_space_subset,
    is_pd,
    is_psd,
    max_norm,
    null_space_basis,
    stack,
    symmetric_part,
)

__all__ = [
    "ExplicitModel",
    "RaoModel",
    "SurModel",
    "Sar1Model",
    "Sma1Model",
    "SerialModel",
    "build_omega",
    "normalize_sur",
    "intraclass_A",
    "ar1_A",
    "circular_A",
    "ConditionVerdict",
    "rao_check",
    "sur_check",
    "spatial_sufficient_check",
    "spatial_all_rho_check",
    "spatial_all_rho_equations",
    "spatial_single_rho_check",
    "spatial_two_point_check",
    "serial_check",
    "parameter_free_check",
]

_EPS = np.finfo(np.float64).eps


class _Model:
    kind = "model"
    parameters: tuple[str, ...] = ()

    @property
    def unknowns(self) -> tuple[str, ...]:
        return tuple(p for p in self.parameters if getattr(self, p) is None)

    def with_params(self, **values):
        return replace(self, **values)

    def omega(self, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
        raise NotImplementedError

    def _require_known(self):
        if self.unknowns:
            raise ModelDomainError(f"{self.kind} model has unknown parameters: {', '.join(self.unknowns)}")


@dataclass(frozen=True)
class ExplicitModel(_Model):
    Omega: np.ndarray
    kind = "explicit"

    def __post_init__(self):
        Om = symmetric_part(self.Omega, DEFAULT_TOL, "Omega")
        if not is_pd(Om):
            raise ModelDomainError("Omega must be positive definite")
        object.__setattr__(self, "Omega", Om)

    def omega(self, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
        return self.Omega.copy()


@dataclass(frozen=True)
class RaoModel(_Model):
    """Mixed effects ``y = X b + X g + Z d + e``.

    ``GammaBar=None`` drops the ``X g`` term (the model without random
    effects along C(X)).  ``DeltaBar=None`` marks it unknown.
    """

    X: np.ndarray
    GammaBar: np.ndarray | None = None
    DeltaBar: np.ndarray | None = None
    Z: np.ndarray | None = None
    kind = "rao"
    parameters = ("DeltaBar",)

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        n, k = X.shape
        Z = null_space_basis(X) if self.Z is None else as_matrix(self.Z, "Z")
        if Z.shape != (n, n - k):
            raise ShapeError(f"Z must be {n}x{n - k}, got {Z.shape}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)
        if self.GammaBar is not None:
            G = symmetric_part(self.GammaBar, DEFAULT_TOL, "GammaBar")
            if G.shape != (k, k) or not is_psd(G):
                raise ModelDomainError(f"GammaBar must be a {k}x{k} psd matrix")
            object.__setattr__(self, "GammaBar", G)
        if self.DeltaBar is not None:
            D = symmetric_part(self.DeltaBar, DEFAULT_TOL, "DeltaBar")
            if D.shape != (n - k, n - k) or not is_psd(D):
                raise ModelDomainError(f"DeltaBar must be a {n - k}x{n - k} psd matrix")
            object.__setattr__(self, "DeltaBar", D)

    @property
    def gamma_bar(self) -> np.ndarray:
        k = self.X.shape[1]
        return np.zeros((k, k)) if self.GammaBar is None else self.GammaBar

    def omega(self, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
        self._require_known()
        n = self.X.shape[0]
        Om = np.eye(n) + self.X @ self.gamma_bar @ self.X.T + self.Z @ self.DeltaBar @ self.Z.T
        return 0.5 * (Om + Om.T)


def normalize_sur(s11: float, s12: float, s22: float) -> tuple[float, float, float]:
    """Rescale raw ``(s11, s12, s22)`` to unit variances.

    Returns ``(rho12, c1, c2)``: equation ``i`` divided by ``c_i`` has unit
    error variance and the two share correlation ``rho12``.
    """
    if not (s11 > 0 and s22 > 0):
        raise ModelDomainError("SUR variances must be positive")
    c1, c2 = math.sqrt(s11), math.sqrt(s22)
    r = s12 / (c1 * c2)
    if not abs(r) < 1:
        raise ModelDomainError("SUR covariance matrix is not positive definite")
    return r, c1, c2


@dataclass(frozen=True)
class SurModel(_Model):
    """Two stacked regressions with ``Cov(eps_1, eps_2) = sigma12 I_m``.

    Variances are normalized to one; use :func:`normalize_sur` on raw values.
    """

    X1: np.ndarray
    X2: np.ndarray
    sigma12: float | None = None
    kind = "sur"
    parameters = ("sigma12",)

    def __post_init__(self):
        X1 = as_matrix(self.X1, "X1")
        X2 = as_matrix(self.X2, "X2")
        if X1.shape[0] != X2.shape[0]:
            raise ShapeError("X1 and X2 need the same number of rows")
        object.__setattr__(self, "X1", X1)
        object.__setattr__(self, "X2", X2)
        if self.sigma12 is not None and not abs(self.sigma12) < 1:
            raise ModelDomainError(f"|sigma12| must be < 1, got {self.sigma12}")

    @property
    def m(self) -> int:
        return self.X1.shape[0]

    @property
    def design(self) -> np.ndarray:
        return sla.block_diag(self.X1, self.X2)

    def omega(self, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
        self._require_known()
        s = self.sigma12
        return np.kron(np.array([[1.0, s], [s, 1.0]]), np.eye(self.m))


@dataclass(frozen=True)
class _SpatialModel(_Model):
    W: np.ndarray
    rho: float | None = None
    parameters = ("rho",)

    def __post_init__(self):
        W = as_matrix(getattr(self.W, "entries", self.W), "W")
        if W.shape[0] != W.shape[1]:
            raise ShapeError(f"W must be square, got {W.shape}")
        if np.any(W < 0):
            raise ModelDomainError("W must be nonnegative")
        if not np.any(W):
            raise ModelDomainError("W must be nonzero")
        sums = W.sum(axis=1)
        bad = (sums != 0) & (np.abs(sums - 1) > DEFAULT_TOL.residual_atol)
        if np.any(bad):
            raise ModelDomainError(f"rows {np.flatnonzero(bad).tolist()} of W do not sum to one")
        object.__setattr__(self, "W", W)
        if self.rho is not None and not abs(self.rho) < 1:
            raise ModelDomainError(f"|rho| must be < 1, got {self.rho}")


@dataclass(frozen=True)
class Sar1Model(_SpatialModel):
    """``eps = rho W eps + e``, so ``Omega = (I - rho W)^-1 (I - rho W')^-1``."""

    kind = "sar1"

    def omega(self, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
        self._require_known()
        n = self.W.shape[0]
        B = np.eye(n) - self.rho * self.W
        if np.linalg.cond(B) > 1e12:
            raise SingularSystemError("I - rho W is numerically singular")
        Binv = sla.lu_solve(sla.lu_factor(B), np.eye(n))
        Om = Binv @ Binv.T
        return 0.5 * (Om + Om.T)


@dataclass(frozen=True)
class Sma1Model(_SpatialModel):
    """``eps = (I + rho W) e``, so ``Omega = (I + rho W)(I + rho W')``."""

    kind = "sma1"

    def omega(self, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
        self._require_known()
        B = np.eye(self.W.shape[0]) + self.rho * self.W
        Om = B @ B.T
        return 0.5 * (Om + Om.T)


@dataclass(frozen=True)
class SerialModel(_Model):
    """``Omega^-1 = I + theta A`` for a known symmetric ``A``."""

    A: np.ndarray
    theta: float | None = None
    kind = "serial"
    parameters = ("theta",)

    def __post_init__(self):
        try:
            A = symmetric_part(self.A, DEFAULT_TOL, "A")
        except Exception as exc:
            raise ModelDomainError(str(exc)) from exc
        object.__setattr__(self, "A", A)
        if self.theta is not None:
            if not math.isfinite(self.theta):
                raise ModelDomainError("theta must be finite")
            if not is_pd(np.eye(A.shape[0]) + self.theta * A):
                raise ModelDomainError(f"I + theta A is not positive definite at theta={self.theta}")

    def omega(self, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
        self._require_known()
        n = self.A.shape[0]
        P = np.eye(n) + self.theta * self.A
        Om = sla.cho_solve(sla.cho_factor(P), np.eye(n))
        return 0.5 * (Om + Om.T)


def build_omega(model: _Model, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Materialize ``Omega``; every parameter must be known."""
    return model.omega(tol)


# Presets for the serial model.  Only the functional form I + theta A is
# fixed; these A matrices are common choices, not canonical ones.

def intraclass_A(n: int) -> np.ndarray:
    """Equicorrelation: ``11' - I``."""
    return np.ones((n, n)) - np.eye(n)


def ar1_A(n: int) -> np.ndarray:
    """Nearest-neighbor band (ones on the first off-diagonals)."""
    return np.eye(n, k=1) + np.eye(n, k=-1)


def circular_A(n: int) -> np.ndarray:
    A = ar1_A(n)
    A[0, -1] = A[-1, 0] = 1.0
    return A


# --------------------------------------------------------------------------
# parameter-free checkers


@dataclass(frozen=True)
class ConditionVerdict:
    """Outcome of a parameter-free check.

    For sufficient-only checks (``exact=False``) a ``False`` verdict means
    "not established", not "the estimators differ".
    """

    holds: bool
    residuals: dict[str, float] = field(default_factory=dict)
    exact: bool = True
    parameter_free: bool = True
    note: str = ""

    def __bool__(self) -> bool:
        return self.holds


def _spec_norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, 2)) if M.size else 0.0


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else num


def _stacked_inclusion(top: np.ndarray, X: np.ndarray, K: np.ndarray, tol: Tolerances) -> Inclusion:
    """``C((top; 0))`` inside ``C((X; K))`` after a common rescaling."""
    s = max(max_norm(X), max_norm(K))
    return col_space_subset(stack(top, 0) / s, stack(X, K) / s, tol)


def _operands(W, X, K):
    W = as_matrix(getattr(W, "entries", W), "W")
    X = as_matrix(X, "X")
    K = as_matrix(K, "K")
    n, k = X.shape
    if W.shape != (n, n):
        raise ShapeError(f"W must be {n}x{n}, got {W.shape}")
    if K.shape != (k, k):
        raise ShapeError(f"K must be {k}x{k}, got {K.shape}")
    if not np.any(W):
        raise InvalidInputError("W must be nonzero")
    return W, X, K


_NOT_ESTABLISHED = "condition not established; test a concrete parameter value with column_space_check"


def rao_check(X, GammaBar, K, tol: Tolerances = DEFAULT_TOL) -> ConditionVerdict:
    """Exact test ``X'X GammaBar K = 0``; valid for every ``DeltaBar``."""
    X = as_matrix(X, "X")
    Gb = as_matrix(GammaBar, "GammaBar")
    K = as_matrix(K, "K")
    XtX = X.T @ X
    raw = max_norm(XtX @ Gb @ K)
    rel = _ratio(raw, max_norm(XtX) * max_norm(Gb) * max_norm(K))
    return ConditionVerdict(rel <= tol.residual_atol, {"XtX_GammaBar_K": raw, "relative": rel})


def sur_check(X1, X2, Z1=None, Z2=None, tol: Tolerances = DEFAULT_TOL) -> ConditionVerdict:
    """``X1'Z2 = 0``, ``X2'Z1 = 0`` and ``X1'X2 = 0`` (sufficient only).

    ``Z1``/``Z2`` default to orthonormal complements of ``X1``/``X2``.

    The first two products force C(X1) == C(X2), after which the third forces
    ``X1 = 0``, so the three can never vanish together for full-rank blocks.
    The check is still computed literally and its residuals reported.
    """
    X1 = as_matrix(X1, "X1")
    X2 = as_matrix(X2, "X2")
    Z1 = null_space_basis(X1, tol) if Z1 is None else as_matrix(Z1, "Z1")
    Z2 = null_space_basis(X2, tol) if Z2 is None else as_matrix(Z2, "Z2")
    res = {
        "X1t_Z2": _ratio(max_norm(X1.T @ Z2), _spec_norm(X1) * _spec_norm(Z2)),
        "X2t_Z1": _ratio(max_norm(X2.T @ Z1), _spec_norm(X2) * _spec_norm(Z1)),
        "X1t_X2": _ratio(max_norm(X1.T @ X2), _spec_norm(X1) * _spec_norm(X2)),
    }
    holds = all(r <= tol.residual_atol for r in res.values())
    return ConditionVerdict(holds, res, exact=False, note="" if holds else _NOT_ESTABLISHED)


def spatial_sufficient_check(W, X, K, tol: Tolerances = DEFAULT_TOL) -> ConditionVerdict:
    """``C((WX; 0))`` and ``C((W'X; 0))`` inside ``C((X; K))`` (sufficient only)."""
    W, X, K = _operands(W, X, K)
    a = _stacked_inclusion(W @ X, X, K, tol)
    b = _stacked_inclusion(W.T @ X, X, K, tol)
    holds = a.holds and b.holds
    return ConditionVerdict(
        holds, {"WX": a.residual, "WtX": b.residual}, exact=False, note="" if holds else _NOT_ESTABLISHED
    )


def spatial_all_rho_check(W, X, K, variant: str = "sma", tol: Tolerances = DEFAULT_TOL) -> ConditionVerdict:
    """Coincidence for every ``0 < |rho| < 1`` at once.

    Tests ``(W + W')X`` and ``W W' X`` (``W' W X`` for ``variant="sar"``)
    against ``C((X; K))`` with a zero lower block.
    """
    if variant not in ("sma", "sar"):
        raise InvalidInputError(f"variant must be 'sma' or 'sar', got {variant!r}")
    W, X, K = _operands(W, X, K)
    second = W @ (W.T @ X) if variant == "sma" else W.T @ (W @ X)
    a = _stacked_inclusion((W + W.T) @ X, X, K, tol)
    b = _stacked_inclusion(second, X, K, tol)
    label = "WWtX" if variant == "sma" else "WtWX"
    return ConditionVerdict(a.holds and b.holds, {"sym_WX": a.residual, label: b.residual})


def spatial_all_rho_equations(W, X, K, tol: Tolerances = DEFAULT_TOL, Z=None) -> ConditionVerdict:
    """The SMA all-``rho`` condition as four matrix equations.

    ``K (X'X)^-1 X' S X = 0``, ``K (X'X)^-1 X' W W' X = 0``,
    ``Z' S X = 0`` and ``Z' W W' X = 0`` with ``S = W + W'``.
    """
    W, X, K = _operands(W, X, K)
    Z = null_space_basis(X, tol) if Z is None else as_matrix(Z, "Z")
    S = W + W.T
    WWt = W @ W.T
    Xpinv = sla.cho_solve(sla.cho_factor(X.T @ X), X.T)
    nK, nP, nX, nZ = _spec_norm(K), _spec_norm(Xpinv), _spec_norm(X), _spec_norm(Z)
    res = {
        "K_sym": _ratio(max_norm(K @ Xpinv @ S @ X), nK * nP * _spec_norm(S) * nX),
        "K_WWt": _ratio(max_norm(K @ Xpinv @ WWt @ X), nK * nP * _spec_norm(WWt) * nX),
        "Z_sym": _ratio(max_norm(Z.T @ S @ X), nZ * _spec_norm(S) * nX),
        "Z_WWt": _ratio(max_norm(Z.T @ WWt @ X), nZ * _spec_norm(WWt) * nX),
    }
    return ConditionVerdict(all(r <= tol.residual_atol for r in res.values()), res)


def spatial_single_rho_check(W, X, K, rho: float, tol: Tolerances = DEFAULT_TOL, variant: str = "sma") -> ConditionVerdict:
    """Coincidence at one ``rho != 0``.

    SMA: ``(W + W' + rho W W')X``; SAR: ``(W + W' - rho W' W)X``.  Either
    must lie in ``C((X; K))`` with a zero lower block.  Not parameter free.
    """
    if rho == 0:
        raise InvalidInputError("rho must be nonzero")
    if variant not in ("sma", "sar"):
        raise InvalidInputError(f"variant must be 'sma' or 'sar', got {variant!r}")
    W, X, K = _operands(W, X, K)
    if variant == "sma":
        top = (W + W.T) @ X + rho * (W @ (W.T @ X))
    else:
        top = (W + W.T) @ X - rho * (W.T @ (W @ X))
    inc = _stacked_inclusion(top, X, K, tol)
    return ConditionVerdict(inc.holds, {"shifted_WX": inc.residual}, parameter_free=False)


def spatial_two_point_check(W, X, K, rho1: float, rho2: float, tol: Tolerances = DEFAULT_TOL) -> ConditionVerdict:
    """SMA coincidence at two distinct ``rho`` in ``(-1, 0) u (0, 1)``.

    A pass implies coincidence for every ``rho`` in that set.
    """
    for r in (rho1, rho2):
        if not (r != 0 and abs(r) < 1):
            raise InvalidInputError(f"rho must satisfy 0 < |rho| < 1, got {r}")
    if rho1 == rho2:
        raise InvalidInputError("the two rho values must differ")
    a = spatial_single_rho_check(W, X, K, rho1, tol)
    b = spatial_single_rho_check(W, X, K, rho2, tol)
    return ConditionVerdict(
        a.holds and b.holds,
        {"rho1": a.residuals["shifted_WX"], "rho2": b.residuals["shifted_WX"]},
        parameter_free=False,
    )


def serial_check(A, X, K, tol: Tolerances = DEFAULT_TOL) -> ConditionVerdict:
    """``C((AX; 0))`` inside ``C((X; K))``; sufficient for every admissible theta."""
    try:
        A = symmetric_part(A, tol, "A")
    except Exception as exc:
        raise ModelDomainError(str(exc)) from exc
    X = as_matrix(X, "X")
    K = as_matrix(K, "K")
    if A.shape[0] != X.shape[0]:
        raise ShapeError(f"A must be {X.shape[0]}x{X.shape[0]}, got {A.shape}")
    inc = _stacked_inclusion(A @ X, X, K, tol)
    return ConditionVerdict(inc.holds, {"AX": inc.residual}, exact=False, note="" if inc.holds else _NOT_ESTABLISHED)


def parameter_free_check(model: _Model, X, K, tol: Tolerances = DEFAULT_TOL) -> dict[str, ConditionVerdict]:
    """Every parameter-free check that applies to ``model``, keyed by name."""
    if isinstance(model, RaoModel):
        return {"rao": rao_check(model.X, model.gamma_bar, K, tol)}
    if isinstance(model, SurModel):
        return {"sur": sur_check(model.X1, model.X2, tol=tol)}
    if isinstance(model, _SpatialModel):
        variant = "sma" if isinstance(model, Sma1Model) else "sar"
        return {
            "spatial_sufficient": spatial_sufficient_check(model.W, X, K, tol),
            "spatial_all_rho": spatial_all_rho_check(model.W, X, K, variant, tol),
        }
    if isinstance(model, SerialModel):
        return {"serial": serial_check(model.A, X, K, tol)}
    return {}
