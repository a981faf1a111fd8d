"""Two-step (feasible) estimation and a seeded Monte Carlo harness.

Step one fits the unknown covariance parameter from OLS residuals; step two
plugs the fitted ``Omega`` into the general ridge estimator.  Step one
admits many methods; each fitter here is one reasonable choice:

* ``rho`` (SAR/SMA) and ``theta`` (serial): minimize the Gaussian
  quasi-likelihood profiled over the error variance, by golden section;
* ``sigma12`` (SUR): residual correlation ``r1'r2 / (|r1| |r2|)``, clamped
  so the implied ``Sigma`` stays positive definite;
* ``DeltaBar`` (Rao): not fitted.  When the cross block of ``Omega`` is zero
  the estimator does not depend on the Z-block at all, so zero is plugged in.

Errors are simulated as Gaussian.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import time

import numpy as np
import scipy.linalg as sla

from .errors import EstimationFailure, GRCoincideError, InvalidInputError, ModelDomainError, ShapeError
from .linalg import DEFAULT_TOL, Tolerances, as_matrix, symmetric_part
from .models import (
    RaoModel,
    Sar1Model,
    SerialModel,
    Sma1Model,
    SurModel,
    _Model,
    _SpatialModel,
    build_omega,
)
from .ridge import Penalty, gr_hat_operator, materialize_penalty

__all__ = [
    "golden_section",
    "make_sampler",
    "sample_errors",
    "ParamEstimate",
    "estimate_rho",
    "estimate_sigma12",
    "estimate_theta",
    "TwoStepResult",
    "two_step_estimate",
    "McConfig",
    "EstimatorRecord",
    "McReport",
    "run_monte_carlo",
    "run_sweep",
    "RHO_BOUND",
]

#: Search interval for rho is ``[-RHO_BOUND, RHO_BOUND]``.
RHO_BOUND = 0.99
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo: float, hi: float, xtol: float = 1e-8, max_iter: int = 200):
    """Minimize a unimodal ``f`` on ``[lo, hi]``.

    Returns ``(x, f(x), trace)`` where ``trace`` lists the bracket after every
    iteration.  The endpoints are compared against the interior optimum so a
    boundary minimum is returned as such.
    """
    if not lo < hi:
        raise InvalidInputError(f"empty search interval [{lo}, {hi}]")
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    trace = [(a, b)]
    for _ in range(max_iter):
        if b - a <= xtol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
        trace.append((a, b))
    else:
        raise EstimationFailure(f"golden section did not converge in {max_iter} iterations", trace)
    if not (math.isfinite(fc) and math.isfinite(fd)):
        raise EstimationFailure("objective is not finite at the optimum", trace)
    x = 0.5 * (a + b)
    fx = f(x)
    for edge in (lo, hi):
        fe = f(edge)
        if math.isfinite(fe) and fe < fx:
            x, fx = edge, fe
    return x, fx, trace


# --------------------------------------------------------------------------
# error sampling


def make_sampler(model: _Model, sigma2: float = 1.0):
    """Return ``draw(rng) -> eps`` with ``Cov(eps) = sigma2 * Omega``.

    Factorizations are done once here so repeated draws are cheap.  Each
    draw is a plain matrix product with read-only operands, so one sampler
    can be shared by worker threads; concurrent ``lu_solve`` calls on a
    shared factorization were observed to return corrupted draws.
    """
    if not sigma2 > 0:
        raise ModelDomainError("sigma2 must be positive")
    if model.unknowns:
        raise ModelDomainError(f"cannot simulate with unknown parameters {model.unknowns}")
    s = math.sqrt(sigma2)
    if isinstance(model, Sar1Model):
        n = model.W.shape[0]
        B = sla.lu_solve(sla.lu_factor(np.eye(n) - model.rho * model.W), np.eye(n))
        return lambda rng: B @ (s * rng.standard_normal(n))
    if isinstance(model, Sma1Model):
        B = np.eye(model.W.shape[0]) + model.rho * model.W
        return lambda rng: B @ (s * rng.standard_normal(B.shape[0]))
    if isinstance(model, SurModel):
        m, r = model.m, model.sigma12
        c = math.sqrt(1.0 - r * r)

        def draw(rng):
            e = s * rng.standard_normal(2 * m)
            return np.concatenate([e[:m], r * e[:m] + c * e[m:]])

        return draw
    L = np.linalg.cholesky(build_omega(model))
    return lambda rng: L @ (s * rng.standard_normal(L.shape[0]))


def sample_errors(model: _Model, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """One draw of ``eps`` with ``Cov(eps) = sigma2 * Omega(model)``."""
    return make_sampler(model, sigma2)(rng)


# --------------------------------------------------------------------------
# step one


@dataclass(frozen=True)
class ParamEstimate:
    """A fitted covariance parameter.

    ``degenerate`` marks zero OLS residuals (value is then 0); ``clamped``
    marks a value pulled back inside the admissible region or one that
    landed on the edge of the search interval (usually a sign that the data
    carry no information about the parameter).
    """

    value: float
    degenerate: bool = False
    clamped: bool = False
    iterations: int = 0

    def __float__(self) -> float:
        return float(self.value)


def _ols_residuals(y, X) -> np.ndarray:
    X = as_matrix(X, "X")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != X.shape[0]:
        raise ShapeError(f"y has {y.shape[0]} entries but X has {X.shape[0]} rows")
    beta = sla.lstsq(X, y)[0]
    return y - X @ beta


def _is_degenerate(r: np.ndarray, y) -> bool:
    scale = max(float(np.linalg.norm(y)), 1.0)
    return float(np.linalg.norm(r)) <= 1e-12 * scale


def _fitted(x: float, lo: float, hi: float, trace) -> ParamEstimate:
    edge = 1e-6 * (hi - lo)
    return ParamEstimate(float(x), clamped=bool(x - lo < edge or hi - x < edge), iterations=len(trace) - 1)


def estimate_rho(y, X, W, variant: str = "sar", xtol: float = 1e-8) -> ParamEstimate:
    """Profile quasi-likelihood estimate of the spatial coefficient.

    Minimizes ``n/2 log(r' Omega(rho)^-1 r / n) + 1/2 log det Omega(rho)``
    over ``[-0.99, 0.99]`` with ``r`` the OLS residuals.
    """
    if variant not in ("sar", "sma"):
        raise InvalidInputError(f"variant must be 'sar' or 'sma', got {variant!r}")
    W = as_matrix(getattr(W, "entries", W), "W")
    r = _ols_residuals(y, X)
    n = r.shape[0]
    if W.shape != (n, n):
        raise ShapeError(f"W must be {n}x{n}, got {W.shape}")
    if _is_degenerate(r, y):
        return ParamEstimate(0.0, degenerate=True)
    lam = np.linalg.eigvals(W)
    I = np.eye(n)
    Wr = W @ r

    if variant == "sar":
        def objective(rho):
            e = r - rho * Wr
            return 0.5 * n * math.log(e @ e / n) - float(np.sum(np.log(np.abs(1.0 - rho * lam))))
    else:
        def objective(rho):
            e = np.linalg.solve(I + rho * W, r)
            return 0.5 * n * math.log(e @ e / n) + float(np.sum(np.log(np.abs(1.0 + rho * lam))))

    x, _, trace = golden_section(objective, -RHO_BOUND, RHO_BOUND, xtol)
    return _fitted(x, -RHO_BOUND, RHO_BOUND, trace)


def estimate_sigma12(y1, y2, X1, X2, tol: Tolerances = DEFAULT_TOL) -> ParamEstimate:
    """Residual cross-moment ``r1'r2 / (|r1| |r2|)``, clamped inside (-1, 1).

    ``r_i`` are per-equation OLS residuals.  Dividing by the residual norms
    instead of ``m`` makes the estimate independent of the overall error
    scale ``sigma2``; the two agree in the limit when ``sigma2 = 1``.
    """
    r1 = _ols_residuals(y1, X1)
    r2 = _ols_residuals(y2, X2)
    if r1.shape != r2.shape:
        raise ShapeError("the two equations need the same number of observations")
    if _is_degenerate(r1, y1) or _is_degenerate(r2, y2):
        return ParamEstimate(0.0, degenerate=True)
    s = float(r1 @ r2) / (float(np.linalg.norm(r1)) * float(np.linalg.norm(r2)))
    bound = 1.0 - tol.psd_atol
    if abs(s) > bound:
        return ParamEstimate(math.copysign(bound, s), clamped=True)
    return ParamEstimate(s)


def theta_interval(A, margin: float = 1e-6, cap: float = 100.0) -> tuple[float, float]:
    """Closed search interval strictly inside ``{theta : I + theta A > 0}``.

    An unbounded side is capped at ``cap / max|eig(A)|``.
    """
    lam = sla.eigvalsh(as_matrix(A, "A"))
    top = float(np.max(np.abs(lam)))
    if top == 0:
        raise ModelDomainError("A = 0 leaves theta unidentifiable")
    lo = -1.0 / lam[-1] if lam[-1] > 0 else -cap / top
    hi = -1.0 / lam[0] if lam[0] < 0 else cap / top
    width = hi - lo
    lo, hi = lo + margin * width, hi - margin * width
    if not lo < hi:
        raise ModelDomainError("no admissible theta")
    return lo, hi


def estimate_theta(y, X, A, xtol: float = 1e-8) -> ParamEstimate:
    """Profile quasi-likelihood estimate of ``theta`` in ``Omega^-1 = I + theta A``."""
    try:
        A = symmetric_part(A, DEFAULT_TOL, "A")
    except GRCoincideError as exc:
        raise ModelDomainError(str(exc)) from exc
    lo, hi = theta_interval(A)
    r = _ols_residuals(y, X)
    n = r.shape[0]
    if A.shape != (n, n):
        raise ShapeError(f"A must be {n}x{n}, got {A.shape}")
    if _is_degenerate(r, y):
        return ParamEstimate(0.0, degenerate=True)
    lam = sla.eigvalsh(A)
    rr, rAr = float(r @ r), float(r @ A @ r)

    def objective(theta):
        q = rr + theta * rAr
        d = 1.0 + theta * lam
        if q <= 0 or np.any(d <= 0):
            return math.inf
        return 0.5 * n * math.log(q / n) - 0.5 * float(np.sum(np.log(d)))

    x, _, trace = golden_section(objective, lo, hi, xtol)
    return _fitted(x, lo, hi, trace)


# --------------------------------------------------------------------------
# step two


@dataclass(frozen=True)
class TwoStepResult:
    beta_hat: np.ndarray
    omega_hat: np.ndarray
    params: dict[str, ParamEstimate] = field(default_factory=dict)


def _design(model: _Model, X) -> np.ndarray:
    if X is not None:
        return as_matrix(X, "X")
    if isinstance(model, SurModel):
        return model.design
    if isinstance(model, RaoModel):
        return model.X
    raise InvalidInputError(f"{model.kind} model needs an explicit design X")


def fit_unknowns(model: _Model, y, X, tol: Tolerances = DEFAULT_TOL) -> tuple[_Model, dict[str, ParamEstimate]]:
    """Step one: fill every unknown parameter of ``model`` from ``y``."""
    if not model.unknowns:
        return model, {}
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if isinstance(model, _SpatialModel):
        est = estimate_rho(y, X, model.W, "sma" if isinstance(model, Sma1Model) else "sar")
        return model.with_params(rho=est.value), {"rho": est}
    if isinstance(model, SerialModel):
        est = estimate_theta(y, X, model.A)
        return model.with_params(theta=est.value), {"theta": est}
    if isinstance(model, SurModel):
        m = model.m
        est = estimate_sigma12(y[:m], y[m:], model.X1, model.X2, tol)
        return model.with_params(sigma12=est.value), {"sigma12": est}
    if isinstance(model, RaoModel):
        q = model.Z.shape[1]
        return model.with_params(DeltaBar=np.zeros((q, q))), {"DeltaBar": ParamEstimate(0.0)}
    raise ModelDomainError(f"no first-step estimator for {model.kind}")


def _penalty_matrix(K, X, Phi, tol):
    if isinstance(K, Penalty):
        return materialize_penalty(K, X, Phi, tol)
    return as_matrix(K, "K")


def two_step_estimate(model: _Model, y, X=None, K=None, tol: Tolerances = DEFAULT_TOL) -> TwoStepResult:
    """Fit the unknowns, build ``Omega_hat`` and return ``beta_GR(Omega_hat, K)``.

    ``K`` may be a :class:`Penalty` (materialized with ``Phi = Omega_hat``)
    or a matrix; ``None`` means zero.
    """
    X = _design(model, X)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    fitted, params = fit_unknowns(model, y, X, tol)
    Om = build_omega(fitted, tol)
    Kmat = _penalty_matrix(Penalty.zero() if K is None else K, X, Om, tol)
    beta = gr_hat_operator(X, Om, Kmat, tol) @ y
    return TwoStepResult(beta, Om, params)


# --------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class McConfig:
    """Inputs of one simulation study.

    ``model`` holds the true parameters; names listed in ``estimate`` are
    hidden from the two-step estimator (default: all of the model's
    parameters).  ``grid`` optionally sweeps the true value of the single
    model parameter.  ``workers`` only affects speed, never results.
    """

    model: _Model
    X: np.ndarray
    beta_true: np.ndarray
    sigma2: float = 1.0
    K: Penalty = field(default_factory=Penalty.zero)
    replications: int = 100
    seed: int = 0
    estimate: tuple[str, ...] | None = None
    grid: tuple[float, ...] | None = None
    workers: int = 1

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        beta = np.asarray(self.beta_true, dtype=np.float64).reshape(-1)
        if beta.shape[0] != X.shape[1]:
            raise ShapeError(f"beta has {beta.shape[0]} entries but X has {X.shape[1]} columns")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "beta_true", beta)
        if not (isinstance(self.replications, int) and self.replications >= 1):
            raise InvalidInputError("replications must be a positive integer")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise InvalidInputError("seed must be an integer in [0, 2**64)")
        if not self.sigma2 > 0:
            raise InvalidInputError("sigma2 must be positive")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")
        if self.model.unknowns:
            raise ModelDomainError(f"true model has unknown parameters {self.model.unknowns}")
        estimate = self.model.parameters if self.estimate is None else tuple(self.estimate)
        bad = set(estimate) - set(self.model.parameters)
        if bad:
            raise InvalidInputError(f"{self.model.kind} model has no parameters {sorted(bad)}")
        object.__setattr__(self, "estimate", estimate)
        if self.grid is not None:
            if self.model.parameters not in (("rho",), ("theta",), ("sigma12",)):
                raise InvalidInputError(f"a grid needs a scalar-parameter model, not {self.model.kind}")
            object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        n = build_omega(self.model).shape[0]
        if n != X.shape[0]:
            raise ShapeError(f"Omega is {n}x{n} but X has {X.shape[0]} rows")

    @property
    def swept_parameter(self) -> str | None:
        return self.model.parameters[0] if self.grid is not None else None


@dataclass(frozen=True)
class EstimatorRecord:
    name: str
    mse: float
    mse_se: float
    bias: tuple[float, ...]
    gap_mean: float
    gap_max: float


@dataclass(frozen=True)
class McReport:
    """Aggregates over the successful replications.

    ``gap_*`` of each record measure ``|beta_hat - beta_cov_free|``.
    ``wall_time`` is informational and excluded from the machine-readable
    output.
    """

    records: tuple[EstimatorRecord, ...]
    replications: int
    failed: int
    seed: int
    wall_time: float
    param_name: str | None = None
    param_true: float | None = None
    param_mean: float | None = None
    omega_hat_cond_mean: float | None = None

    def record(self, name: str) -> EstimatorRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)


ESTIMATORS = ("oracle", "two_step", "cov_free")


def _replicate(cfg: McConfig, index: int, sampler, hidden: _Model, H_oracle, H_free, tol):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, index]))
    y = cfg.X @ cfg.beta_true + sampler(rng)
    try:
        fitted, params = fit_unknowns(hidden, y, cfg.X, tol)
        Om = build_omega(fitted, tol)
        K = materialize_penalty(cfg.K, cfg.X, Om, tol)
        b_two = gr_hat_operator(cfg.X, Om, K, tol) @ y
        cond = float(np.linalg.cond(Om))
    except (GRCoincideError, np.linalg.LinAlgError):
        return None
    p = params[cfg.estimate[0]].value if len(cfg.estimate) == 1 and not isinstance(hidden, RaoModel) else None
    return H_oracle @ y, b_two, H_free @ y, cond, p


def _mean(values) -> float:
    return math.fsum(values) / len(values)


def run_monte_carlo(cfg: McConfig, tol: Tolerances = DEFAULT_TOL) -> McReport:
    """Simulate ``y = X beta + eps`` and compare three estimators.

    ``oracle`` uses the true ``Omega``, ``two_step`` the fitted one and
    ``cov_free`` the identity.  Replication ``i`` draws from the stream
    seeded by ``(seed, i)``, and sums use ``math.fsum``.  Results are
    therefore bit-identical for any ``workers``.
    """
    t0 = time.perf_counter()
    Om = build_omega(cfg.model, tol)
    H_oracle = gr_hat_operator(cfg.X, Om, materialize_penalty(cfg.K, cfg.X, Om, tol), tol)
    H_free = gr_hat_operator(cfg.X, None, materialize_penalty(cfg.K, cfg.X, None, tol), tol)
    hidden = cfg.model.with_params(**{p: None for p in cfg.estimate})
    sampler = make_sampler(cfg.model, cfg.sigma2)

    def job(i):
        return _replicate(cfg, i, sampler, hidden, H_oracle, H_free, tol)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(job, range(cfg.replications)))
    else:
        results = [job(i) for i in range(cfg.replications)]
    ok = [r for r in results if r is not None]
    failed = len(results) - len(ok)
    if not ok:
        raise EstimationFailure(f"all {cfg.replications} replications failed")

    beta = cfg.beta_true
    records = []
    for j, name in enumerate(ESTIMATORS):
        est = [r[j] for r in ok]
        sq = [math.fsum((b - beta) ** 2) for b in est]
        mse = _mean(sq)
        se = math.sqrt(math.fsum((s - mse) ** 2 for s in sq) / (len(sq) * (len(sq) - 1))) if len(sq) > 1 else math.nan
        bias = tuple(_mean([b[c] - beta[c] for b in est]) for c in range(beta.shape[0]))
        gaps = [float(np.sqrt(math.fsum((b - r[2]) ** 2))) for b, r in zip(est, ok)]
        records.append(EstimatorRecord(name, mse, se, bias, _mean(gaps), max(gaps)))

    fitted = [r[4] for r in ok if r[4] is not None]
    name = cfg.estimate[0] if len(cfg.estimate) == 1 and fitted else None
    true_value = getattr(cfg.model, name) if name else None
    return McReport(
        tuple(records),
        cfg.replications,
        failed,
        cfg.seed,
        time.perf_counter() - t0,
        param_name=name,
        param_true=float(true_value) if isinstance(true_value, (int, float)) else None,
        param_mean=_mean(fitted) if fitted else None,
        omega_hat_cond_mean=_mean([r[3] for r in ok]),
    )


def run_sweep(cfg: McConfig, tol: Tolerances = DEFAULT_TOL) -> list[tuple[float | None, McReport]]:
    """One report per grid value of the model parameter (or a single run)."""
    if cfg.grid is None:
        return [(None, run_monte_carlo(cfg, tol))]
    out = []
    pname = cfg.swept_parameter
    for g in cfg.grid:
        sub = McConfig(
            cfg.model.with_params(**{pname: g}), cfg.X, cfg.beta_true, cfg.sigma2, cfg.K,
            cfg.replications, cfg.seed, cfg.estimate, None, cfg.workers,
        )
        out.append((g, run_monte_carlo(sub, tol)))
    return out
