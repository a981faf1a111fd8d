"""Contiguity matrices, row-normalized spatial weights and the cyclic fixture."""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError, ShapeError
from .linalg import as_matrix

__all__ = [
    "ContiguityMatrix",
    "WeightMatrix",
    "row_normalize",
    "inf_norm",
    "pd_guarantee",
    "lattice_contiguity",
    "cycle_contiguity",
    "CyclicCounterexample",
    "counterexample_instance",
]


@dataclass(frozen=True)
class ContiguityMatrix:
    """Binary, symmetric adjacency ``c_ij`` with an empty diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        C = as_matrix(self.entries, "contiguity matrix")
        if C.shape[0] != C.shape[1]:
            raise ShapeError(f"contiguity matrix must be square, got {C.shape}")
        if not np.all((C == 0) | (C == 1)):
            raise InvalidInputError("contiguity entries must be 0 or 1")
        if np.any(np.diag(C) != 0):
            raise InvalidInputError("a region cannot be contiguous with itself")
        if not np.array_equal(C, C.T):
            raise InvalidInputError("contiguity must be symmetric")
        object.__setattr__(self, "entries", C)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges) -> ContiguityMatrix:
        """Build from 1-based ``(i, j)`` pairs; each pair is added both ways."""
        C = np.zeros((n, n))
        for i, j in edges:
            if not (1 <= i <= n and 1 <= j <= n):
                raise InvalidInputError(f"edge ({i}, {j}) out of range 1..{n}")
            if i == j:
                raise InvalidInputError(f"self-loop at region {i}")
            C[i - 1, j - 1] = C[j - 1, i - 1] = 1.0
        return cls(C)

    def edges(self) -> list[tuple[int, int]]:
        """1-based pairs with ``i < j``."""
        iu, ju = np.nonzero(np.triu(self.entries, 1))
        return [(int(i) + 1, int(j) + 1) for i, j in zip(iu, ju)]


@dataclass(frozen=True)
class WeightMatrix:
    entries: np.ndarray
    row_sums: np.ndarray
    isolated: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def has_isolated(self) -> bool:
        return bool(self.isolated.any())


def row_normalize(C: ContiguityMatrix) -> WeightMatrix:
    """``w_ij = c_ij / sum_j c_ij``; regions without neighbors keep a zero row."""
    if not isinstance(C, ContiguityMatrix):
        C = ContiguityMatrix(C)
    counts = C.entries.sum(axis=1)
    isolated = counts == 0
    W = np.zeros_like(C.entries)
    W[~isolated] = C.entries[~isolated] / counts[~isolated, None]
    return WeightMatrix(W, W.sum(axis=1), isolated)


def _entries(W) -> np.ndarray:
    return W.entries if isinstance(W, WeightMatrix) else as_matrix(W, "W")


def inf_norm(W) -> float:
    """Maximum absolute row sum."""
    A = _entries(W)
    return float(np.abs(A).sum(axis=1).max()) if A.size else 0.0


def pd_guarantee(W, rho: float) -> bool:
    """``|rho| * ||W||_inf < 1``, which makes both spatial covariances positive definite."""
    return abs(rho) * inf_norm(W) < 1.0


def lattice_contiguity(rows: int, cols: int) -> ContiguityMatrix:
    """Rook contiguity on a ``rows x cols`` grid, regions numbered row-major."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c + 1
            if c + 1 < cols:
                edges.append((i, i + 1))
            if r + 1 < rows:
                edges.append((i, i + cols))
    return ContiguityMatrix.from_edges(rows * cols, edges)


def cycle_contiguity(n: int) -> ContiguityMatrix:
    if n < 3:
        raise InvalidInputError("a cycle needs at least 3 regions")
    return ContiguityMatrix.from_edges(n, [(i, i % n + 1) for i in range(1, n + 1)])


class CyclicCounterexample(NamedTuple):
    W: np.ndarray
    X: np.ndarray
    rho: float
    K: np.ndarray


def counterexample_instance() -> CyclicCounterexample:
    """Five regions on a directed cycle where ``Omega X = X`` but ``W X != 0``.

    ``W`` shifts each region to the next (so ``W^5 = I``), ``X`` holds the
    real and imaginary parts of the Fourier vector at angle ``2 pi / 5`` and
    ``rho = -2 cos(2 pi / 5)`` puts that vector's eigenvalue of the SMA(1)
    covariance at exactly one.  ``W`` is a permutation matrix, not the
    normalization of a symmetric contiguity matrix.
    """
    n = 5
    theta = 2.0 * math.pi / n
    W = np.roll(np.eye(n), 1, axis=1)
    m = np.arange(n)
    X = np.column_stack([np.cos(m * theta), np.sin(m * theta)])
    X[0] = (1.0, 0.0)
    return CyclicCounterexample(W, X, -2.0 * math.cos(theta), np.eye(2))
