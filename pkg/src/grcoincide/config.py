"""Textual specs for matrices, penalties and models, and simulation config files.

Matrix specs (``resolve_matrix``):

* a path to a matrix file, relative to ``base`` when not absolute;
* ``identity`` (size taken from context);
* ``generate:N:K[:SEED]``: an intercept column plus ``K - 1`` standard
  normal columns drawn with ``SEED`` (default 0);
* ``fixture:NAME:KEY``: matrix ``KEY`` of a named fixture (see
  :mod:`grcoincide.fixtures`).

Weight specs (``resolve_weights``) additionally accept ``lattice:RxC``,
``cycle:N`` and ``counterexample``; a file holding an edge list or a 0/1
matrix is row-normalized, any other matrix file is used as ``W`` as is.
Serial ``A`` specs accept ``intraclass``, ``ar1`` and ``circular``.

Simulation config keys are listed in :data:`CONFIG_KEYS`.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError, SpecError
from .fixtures import get_fixture
from .io import format_float, read_contiguity, read_key_values, read_matrix, write_key_values, write_matrix
from .models import (
    ExplicitModel,
    RaoModel,
    Sar1Model,
    SerialModel,
    Sma1Model,
    SurModel,
    _Model,
    ar1_A,
    circular_A,
    intraclass_A,
)
from .ridge import Penalty
from .twostep import McConfig
from .weights import counterexample_instance, cycle_contiguity, lattice_contiguity, row_normalize

__all__ = [
    "CONFIG_KEYS",
    "parse_penalty",
    "resolve_matrix",
    "resolve_weights",
    "resolve_serial_A",
    "parse_model_spec",
    "load_config",
    "dump_config",
    "config_from_mapping",
]

#: Every key a simulation config may contain, with a one-line meaning.
CONFIG_KEYS = {
    "model": "sar1 | sma1 | serial | sur | rao | explicit",
    "W": "weight spec (sar1, sma1)",
    "rho": "true rho (sar1, sma1)",
    "A": "serial A spec",
    "theta": "true theta (serial)",
    "X": "design matrix spec (not used by sur)",
    "X1": "first SUR block",
    "X2": "second SUR block",
    "sigma12": "true cross-equation covariance (sur)",
    "Omega": "covariance matrix spec (explicit)",
    "GammaBar": "X-block random-effect covariance (rao, optional)",
    "DeltaBar": "Z-block random-effect covariance (rao)",
    "beta": "comma-separated true coefficients",
    "sigma2": "error variance (default 1)",
    "K": "penalty spec: zero | ridge:LAMBDA | shrink:DELTA | matrix spec",
    "replications": "number of replications (default 100)",
    "seed": "integer seed (default 0)",
    "estimate": "comma-separated parameters hidden from the two-step fit, or 'none'",
    "grid": "comma-separated true parameter values to sweep",
    "workers": "thread count (default 1; does not change results)",
}


def _float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise SpecError(f"{what}: not a number: {text!r}") from None


def _path(spec: str, base) -> Path:
    p = Path(spec)
    return p if p.is_absolute() or base is None else Path(base) / p


def parse_penalty(spec: str, base=None) -> Penalty:
    """``zero``, ``ridge:LAMBDA``, ``shrink:DELTA`` or a matrix spec."""
    spec = spec.strip()
    if spec == "zero":
        return Penalty.zero()
    head, _, rest = spec.partition(":")
    if head == "ridge":
        return Penalty.ridge(_float(rest, "ridge constant"))
    if head in ("shrink", "shrinkage"):
        return Penalty.shrinkage(_float(rest, "shrinkage constant"))
    return Penalty.custom(resolve_matrix(spec, base))


def _generate(parts: list[str]) -> np.ndarray:
    if len(parts) not in (2, 3):
        raise SpecError("generate needs N:K[:SEED]")
    try:
        n, k = int(parts[0]), int(parts[1])
        seed = int(parts[2]) if len(parts) == 3 else 0
    except ValueError:
        raise SpecError(f"generate: bad integers in {':'.join(parts)!r}") from None
    if not (1 <= k <= n):
        raise SpecError(f"generate: need 1 <= K <= N, got N={n}, K={k}")
    rng = np.random.default_rng(seed)
    return np.column_stack([np.ones(n), rng.standard_normal((n, k - 1))])


def resolve_matrix(spec: str, base=None, n: int | None = None) -> np.ndarray:
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    if spec == "identity":
        if n is None:
            raise SpecError("'identity' needs a known dimension here")
        return np.eye(n)
    if head == "generate":
        return _generate(rest.split(":"))
    if head == "fixture":
        name, _, key = rest.partition(":")
        mats = get_fixture(name).matrices()
        if key not in mats:
            raise SpecError(f"fixture {name!r} has no matrix {key!r}; has {', '.join(mats)}")
        return mats[key]
    return read_matrix(_path(spec, base))


def resolve_weights(spec: str, base=None) -> np.ndarray:
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    try:
        if head == "lattice":
            r, c = (int(v) for v in rest.lower().split("x"))
            return row_normalize(lattice_contiguity(r, c)).entries
        if head == "cycle":
            return row_normalize(cycle_contiguity(int(rest))).entries
    except ValueError:
        raise SpecError(f"bad weight spec {spec!r}") from None
    if spec == "counterexample":
        return counterexample_instance().W
    if head == "fixture":
        return resolve_matrix(spec, base)
    path = _path(spec, base)
    try:
        C = read_contiguity(path)
    except (FormatError, InvalidInputError) as first:
        try:
            return read_matrix(path)
        except FormatError:
            raise first from None
    return row_normalize(C).entries


def resolve_serial_A(spec: str, n: int | None, base=None) -> np.ndarray:
    presets = {"intraclass": intraclass_A, "ar1": ar1_A, "circular": circular_A}
    spec = spec.strip()
    if spec in presets:
        if n is None:
            raise SpecError(f"serial preset {spec!r} needs the number of observations")
        return presets[spec](n)
    return resolve_matrix(spec, base, n)


def _n_rows(X) -> int | None:
    return None if X is None else np.asarray(X).shape[0]


def parse_model_spec(spec: str, X=None, base=None, rho=None, theta=None, sigma12=None) -> _Model:
    """Command-line model spec.

    ``explicit:MATRIX``, ``rao[:DELTABAR[:GAMMABAR]]``, ``sur:X1:X2``,
    ``sar1:WEIGHTS``, ``sma1:WEIGHTS`` or ``serial:A``.  Parameters left
    as ``None`` are unknown.
    """
    kind, _, rest = spec.strip().partition(":")
    n = _n_rows(X)
    if kind == "explicit":
        return ExplicitModel(resolve_matrix(rest or "identity", base, n))
    if kind in ("sar1", "sma1"):
        if not rest:
            raise SpecError(f"{kind} needs a weight spec, e.g. {kind}:w.txt")
        cls = Sar1Model if kind == "sar1" else Sma1Model
        return cls(resolve_weights(rest, base), rho)
    if kind == "serial":
        return SerialModel(resolve_serial_A(rest or "intraclass", n, base), theta)
    if kind == "sur":
        parts = rest.split(":") if rest else []
        if len(parts) != 2:
            raise SpecError("sur needs two blocks: sur:X1:X2")
        return SurModel(resolve_matrix(parts[0], base), resolve_matrix(parts[1], base), sigma12)
    if kind == "rao":
        if X is None:
            raise SpecError("rao model needs --X")
        parts = rest.split(":") if rest else []
        delta = resolve_matrix(parts[0], base) if parts and parts[0] else None
        gamma = resolve_matrix(parts[1], base) if len(parts) > 1 else None
        return RaoModel(X, gamma, delta)
    raise SpecError(f"unknown model kind {kind!r}; use explicit, rao, sur, sar1, sma1 or serial")


def _floats(text: str, what: str) -> tuple[float, ...]:
    items = [t for t in (s.strip() for s in text.split(",")) if t]
    if not items:
        raise SpecError(f"{what}: empty list")
    return tuple(_float(t, what) for t in items)


def _int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise SpecError(f"{what}: not an integer: {text!r}") from None


def config_from_mapping(values: dict[str, str], base=None) -> McConfig:
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise SpecError(f"unknown config keys: {', '.join(unknown)}")
    if "model" not in values:
        raise SpecError("config needs a 'model' key")
    kind = values["model"]

    def need(key):
        if key not in values:
            raise SpecError(f"model {kind} needs key {key!r}")
        return values[key]

    if kind == "sur":
        model: _Model = SurModel(
            resolve_matrix(need("X1"), base), resolve_matrix(need("X2"), base), _float(need("sigma12"), "sigma12")
        )
        X = model.design
    else:
        X = resolve_matrix(need("X"), base)
        n = X.shape[0]
        if kind in ("sar1", "sma1"):
            cls = Sar1Model if kind == "sar1" else Sma1Model
            model = cls(resolve_weights(need("W"), base), _float(need("rho"), "rho"))
        elif kind == "serial":
            model = SerialModel(resolve_serial_A(need("A"), n, base), _float(need("theta"), "theta"))
        elif kind == "rao":
            gamma = resolve_matrix(values["GammaBar"], base) if "GammaBar" in values else None
            model = RaoModel(X, gamma, resolve_matrix(need("DeltaBar"), base, n - X.shape[1]))
        elif kind == "explicit":
            model = ExplicitModel(resolve_matrix(need("Omega"), base, n))
        else:
            raise SpecError(f"unknown model {kind!r}")
    estimate = None
    if "estimate" in values:
        text = values["estimate"].strip()
        estimate = () if text == "none" else tuple(s.strip() for s in text.split(",") if s.strip())
    return McConfig(
        model=model,
        X=X,
        beta_true=_floats(need("beta"), "beta"),
        sigma2=_float(values.get("sigma2", "1"), "sigma2"),
        K=parse_penalty(values.get("K", "zero"), base),
        replications=_int(values.get("replications", "100"), "replications"),
        seed=_int(values.get("seed", "0"), "seed"),
        estimate=estimate,
        grid=_floats(values["grid"], "grid") if "grid" in values else None,
        workers=_int(values.get("workers", "1"), "workers"),
    )


def load_config(path) -> McConfig:
    path = Path(path)
    return config_from_mapping(read_key_values(path), path.parent)


def dump_config(cfg: McConfig, path) -> Path:
    """Write ``cfg`` as a config file plus one matrix file per matrix.

    Matrix files are named ``<stem>.<key>.txt`` next to ``path``; loading the
    result reproduces ``cfg`` exactly.
    """
    path = Path(path)
    stem = path.stem
    values: dict[str, str] = {"model": cfg.model.kind}

    def put_matrix(key, M):
        name = f"{stem}.{key}.txt"
        write_matrix(path.parent / name, M)
        values[key] = name

    m = cfg.model
    if isinstance(m, SurModel):
        put_matrix("X1", m.X1)
        put_matrix("X2", m.X2)
        values["sigma12"] = format_float(m.sigma12)
    else:
        put_matrix("X", cfg.X)
        if isinstance(m, (Sar1Model, Sma1Model)):
            put_matrix("W", m.W)
            values["rho"] = format_float(m.rho)
        elif isinstance(m, SerialModel):
            put_matrix("A", m.A)
            values["theta"] = format_float(m.theta)
        elif isinstance(m, RaoModel):
            if m.GammaBar is not None:
                put_matrix("GammaBar", m.GammaBar)
            put_matrix("DeltaBar", m.DeltaBar)
        elif isinstance(m, ExplicitModel):
            put_matrix("Omega", m.Omega)
    values["beta"] = ",".join(format_float(b) for b in cfg.beta_true)
    values["sigma2"] = format_float(cfg.sigma2)
    if cfg.K.kind == "custom":
        put_matrix("K", cfg.K.matrix)
    else:
        values["K"] = cfg.K.describe()
    values["replications"] = str(cfg.replications)
    values["seed"] = str(cfg.seed)
    if cfg.estimate is not None:
        values["estimate"] = ",".join(cfg.estimate) if cfg.estimate else "none"
    if cfg.grid is not None:
        values["grid"] = ",".join(format_float(g) for g in cfg.grid)
    values["workers"] = str(cfg.workers)
    write_key_values(path, values)
    return path

