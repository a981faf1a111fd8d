"""Named, fully deterministic instances used by the demo command and the tests."""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, SpecError
from .io import write_matrix
from .models import RaoModel, Sar1Model, SerialModel, Sma1Model, SurModel, _Model, intraclass_A
from .weights import counterexample_instance, cycle_contiguity, lattice_contiguity, row_normalize

__all__ = ["Fixture", "FIXTURES", "get_fixture", "sma_nullspace_instance", "sur_orthogonal_blocks"]


@dataclass(frozen=True)
class Fixture:
    """A model with its design, penalty and the verdicts it is known to give.

    ``expected`` maps a check name to its verdict; ``basis`` explains, in a
    sentence, why each verdict is what it is.
    """

    name: str
    summary: str
    model: _Model
    X: np.ndarray
    K: np.ndarray
    expected: dict[str, bool]
    basis: str
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    def matrices(self) -> dict[str, np.ndarray]:
        out = {"X": self.X, "K": self.K}
        for attr in ("W", "A", "X1", "X2", "DeltaBar"):
            value = getattr(self.model, attr, None)
            if value is not None:
                out[attr] = value
        out.update(self.extra)
        return out

    def write(self, outdir) -> dict[str, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = {}
        for key, M in self.matrices().items():
            p = outdir / f"{key}.txt"
            write_matrix(p, M, comment=f"{self.name}: {key}")
            paths[key] = p
        return paths


def _counterexample() -> Fixture:
    ce = counterexample_instance()
    return Fixture(
        "counterexample",
        "five-region directed cycle, SMA(1) at rho = -2cos(2pi/5)",
        Sma1Model(ce.W, ce.rho),
        ce.X,
        ce.K,
        {"equal": True, "spatial_sufficient": False, "spatial_all_rho": False},
        "Omega X = X at this rho, so the estimators agree, yet W X is not zero; "
        "the sufficient condition on W fails and so does coincidence at other rho",
    )


def sma_nullspace_instance():
    """8-cycle with symmetric ``W = C/2`` and ``X`` spanning the kernel of ``W``.

    ``W X = 0``, so ``Omega(rho) X = X`` for every ``rho`` of either spatial
    model and every penalty.
    """
    W = row_normalize(cycle_contiguity(8)).entries
    m = np.arange(8)
    X = np.column_stack([np.cos(m * math.pi / 2), np.sin(m * math.pi / 2)])
    X[np.abs(X) < 0.5] = 0.0
    return W, X


def _sma_nullspace() -> Fixture:
    W, X = sma_nullspace_instance()
    return Fixture(
        "sma-nullspace",
        "8-cycle SMA(1) with X in the kernel of W",
        Sma1Model(W, 0.5),
        X,
        np.eye(2),
        {"equal": True, "spatial_sufficient": True, "spatial_all_rho": True},
        "W X = 0 makes Omega(rho) X = X for all rho",
    )


def _rao_zero_gamma() -> Fixture:
    rng = np.random.default_rng(20240601)
    n, k = 12, 3
    X = rng.standard_normal((n, k))
    model = RaoModel(X)
    L = rng.standard_normal((n - k, n - k))
    model = model.with_params(DeltaBar=L @ L.T / (n - k))
    return Fixture(
        "rao-zero-gamma",
        "mixed model without random effects along C(X)",
        model,
        X,
        np.eye(k),
        {"equal": True, "rao": True},
        "with no X-block random effect the cross block of Omega is zero and "
        "X'X Gamma = I, so every penalty and every DeltaBar give coincidence",
    )


def sur_orthogonal_blocks(m: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate blocks ``X1 = (e1, e2)``, ``X2 = (e3, e4)`` in ``R^m``."""
    if m < 4:
        raise InvalidInputError("need m >= 4")
    E = np.eye(m)
    return E[:, :2].copy(), E[:, 2:4].copy()


def _sur_orthogonal() -> Fixture:
    X1, X2 = sur_orthogonal_blocks()
    model = SurModel(X1, X2, 0.5)
    return Fixture(
        "sur-orthogonal",
        "two-equation SUR with mutually orthogonal coordinate blocks, sigma12 = 0.5",
        model,
        model.design,
        np.zeros((4, 4)),
        {"equal": False, "sur": False},
        "X1'X2 = 0 but X1'Z2 != 0: the orthogonality conditions cannot all hold "
        "for nonzero blocks, and at sigma12 != 0 the estimators differ",
    )


def _sar_lattice() -> Fixture:
    rng = np.random.default_rng(7)
    W = row_normalize(lattice_contiguity(5, 5)).entries
    X = np.column_stack([np.ones(25), rng.standard_normal(25)])
    return Fixture(
        "sar-lattice",
        "5x5 rook lattice, SAR(1) at rho = 0.6, intercept plus one random regressor",
        Sar1Model(W, 0.6),
        X,
        np.zeros((2, 2)),
        {"equal": False, "spatial_sufficient": False, "spatial_all_rho": False},
        "a generic regressor is not mapped into C(X) by W",
    )


def _serial_intraclass() -> Fixture:
    n = 10
    return Fixture(
        "serial-intraclass",
        "equicorrelated errors with an intercept-only design, theta = 0.5",
        SerialModel(intraclass_A(n), 0.5),
        np.ones((n, 1)),
        np.zeros((1, 1)),
        {"equal": True, "serial": True},
        "A 1 = (n - 1) 1 keeps C(X) invariant, so coincidence holds for every theta",
    )


_BUILDERS = {
    "counterexample": _counterexample,
    "rao-zero-gamma": _rao_zero_gamma,
    "sur-orthogonal": _sur_orthogonal,
    "sar-lattice": _sar_lattice,
    "serial-intraclass": _serial_intraclass,
    "sma-nullspace": _sma_nullspace,
}

#: Names accepted by :func:`get_fixture`.
FIXTURES = tuple(_BUILDERS)


def get_fixture(name: str) -> Fixture:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise SpecError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}") from None
