import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from grcoincide.errors import InvalidInputError, ShapeError
from grcoincide.models import Sma1Model, build_omega
from grcoincide.weights import (
    ContiguityMatrix,
    counterexample_instance,
    cycle_contiguity,
    inf_norm,
    lattice_contiguity,
    pd_guarantee,
    row_normalize,
)


def test_row_normalize_rows_sum_to_one():
    W = row_normalize(lattice_contiguity(3, 4))
    assert_allclose(W.entries.sum(axis=1), 1.0)
    assert not W.has_isolated
    assert inf_norm(W) == pytest.approx(1.0)


def test_isolated_region_keeps_zero_row():
    C = ContiguityMatrix.from_edges(4, [(1, 2), (2, 3)])
    W = row_normalize(C)
    assert W.isolated.tolist() == [False, False, False, True]
    assert not W.entries[3].any()
    assert W.row_sums.tolist() == [1.0, 1.0, 1.0, 0.0]


def test_row_normalize_accepts_raw_array():
    W = row_normalize(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert_allclose(W.entries, [[0.0, 1.0], [1.0, 0.0]])


@pytest.mark.parametrize(
    "bad, err",
    [
        (np.array([[0.0, 2.0], [2.0, 0.0]]), InvalidInputError),
        (np.array([[1.0, 1.0], [1.0, 0.0]]), InvalidInputError),
        (np.array([[0.0, 1.0], [0.0, 0.0]]), InvalidInputError),
        (np.zeros((2, 3)), ShapeError),
    ],
)
def test_contiguity_validation(bad, err):
    with pytest.raises(err):
        ContiguityMatrix(bad)


def test_from_edges_validation():
    with pytest.raises(InvalidInputError):
        ContiguityMatrix.from_edges(3, [(1, 4)])
    with pytest.raises(InvalidInputError):
        ContiguityMatrix.from_edges(3, [(2, 2)])


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 12), data=st.data())
def test_edges_round_trip(n, data):
    pairs = data.draw(st.sets(st.tuples(st.integers(1, n), st.integers(1, n)).filter(lambda p: p[0] != p[1])))
    C = ContiguityMatrix.from_edges(n, pairs)
    assert set(C.edges()) == {(min(i, j), max(i, j)) for i, j in pairs}
    assert np.array_equal(ContiguityMatrix.from_edges(n, C.edges()).entries, C.entries)


@pytest.mark.parametrize("r, c", [(1, 5), (3, 3), (4, 6)])
def test_lattice_edge_count(r, c):
    assert len(lattice_contiguity(r, c).edges()) == 2 * r * c - r - c


def test_cycle():
    C = cycle_contiguity(6)
    assert_allclose(C.entries.sum(axis=1), 2.0)
    with pytest.raises(InvalidInputError):
        cycle_contiguity(2)


@settings(max_examples=30, deadline=None)
@given(rho=st.floats(-0.999, 0.999), seed=st.integers(0, 1000))
def test_pd_guarantee_implies_positive_definite(rho, seed):
    rng = np.random.default_rng(seed)
    C = (rng.random((8, 8)) < 0.4).astype(float)
    C = np.triu(C, 1)
    C = C + C.T
    C[0, 1] = C[1, 0] = 1.0
    W = row_normalize(C)
    assert pd_guarantee(W, rho)
    B = np.eye(8) + rho * W.entries
    assert np.linalg.eigvalsh(B @ B.T).min() > 0
    assert np.linalg.eigvals(np.eye(8) - rho * W.entries).real.min() > 0


def test_pd_guarantee_boundary():
    W = row_normalize(cycle_contiguity(5))
    assert not pd_guarantee(W, 1.0)
    assert pd_guarantee(W.entries, 0.5)


def test_counterexample_properties():
    ce = counterexample_instance()
    assert_allclose(np.linalg.matrix_power(ce.W, 5), np.eye(5))
    assert_allclose(ce.X[0], [1.0, 0.0])
    assert ce.rho == pytest.approx(-2 * math.cos(2 * math.pi / 5), abs=0)
    assert ce.rho == pytest.approx(-0.6180339887498949, rel=1e-15)
    Omega = build_omega(Sma1Model(ce.W, ce.rho))
    assert np.abs(Omega @ ce.X - ce.X).max() <= 1e-10
    assert np.abs(ce.W @ ce.X).max() >= 0.1
    assert_allclose(ce.K, np.eye(2))
