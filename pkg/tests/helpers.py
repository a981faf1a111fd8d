"""Random instance generators shared by the test modules."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla


def random_design(rng, n, k):
    return rng.standard_normal((n, k))


def random_psd(rng, k, rank=None):
    rank = k if rank is None else rank
    B = rng.standard_normal((k, rank))
    return B @ B.T


def random_pd(rng, k, floor=0.5):
    return random_psd(rng, k) + floor * np.eye(k)


def complement(X):
    """Orthonormal basis of the orthogonal complement of C(X)."""
    return sla.null_space(X.T)


def _shape(rng, n_max=30, k_max=6):
    k = int(rng.integers(1, k_max + 1))
    n = int(rng.integers(k + 2, n_max + 1))
    return n, k


def coinciding_instance(rng, n_max=30, k_max=6):
    """Omega with a zero cross block and ``Gamma = (X'X)^-1 + Q S Q'``.

    ``Q`` spans the null space of ``K``, so ``X'X Gamma K = K`` holds and the
    two estimators coincide.
    """
    n, k = _shape(rng, n_max, k_max)
    X = random_design(rng, n, k)
    r = int(rng.integers(0, k + 1))
    K = random_psd(rng, k, r) if r else np.zeros((k, k))
    Q = sla.null_space(K) if r else np.eye(k)
    XtX_inv = np.linalg.inv(X.T @ X)
    S = random_psd(rng, Q.shape[1]) if Q.shape[1] else np.zeros((0, 0))
    Gamma = XtX_inv + Q @ S @ Q.T
    Z = complement(X)
    Delta = random_pd(rng, n - k)
    Omega = X @ Gamma @ X.T + Z @ Delta @ Z.T
    return 0.5 * (Omega + Omega.T), X, K


def differing_instance(rng, n_max=30, k_max=6):
    """Either a dense random Omega, or a zero cross block whose Gamma breaks
    ``X'X Gamma K = K`` for a nonzero K."""
    n, k = _shape(rng, n_max, k_max)
    X = random_design(rng, n, k)
    if rng.random() < 0.5:
        Omega = random_pd(rng, n)
        r = int(rng.integers(0, k + 1))
        K = random_psd(rng, k, r) if r else np.zeros((k, k))
    else:
        K = random_psd(rng, k, int(rng.integers(1, k + 1)))
        Gamma = np.linalg.inv(X.T @ X) + random_pd(rng, k)
        Z = complement(X)
        Omega = X @ Gamma @ X.T + Z @ random_pd(rng, n - k) @ Z.T
    return 0.5 * (Omega + Omega.T), X, K


def ols(X, y):
    return np.linalg.lstsq(X, y, rcond=None)[0]


def direct_gr(X, Phi, K, y):
    """Normal equations with explicit inverses; the reference implementation."""
    Pinv = np.linalg.inv(Phi)
    return np.linalg.solve(X.T @ Pinv @ X + K, X.T @ Pinv @ y)


def symmetric_weights(rng, n):
    """Row-normalized cycle for even n half the time, else a random symmetric W."""
    if rng.random() < 0.5:
        W = np.roll(np.eye(n), 1, axis=1) + np.roll(np.eye(n), -1, axis=1)
        return W / 2.0
    A = rng.random((n, n))
    return (A + A.T) / (2 * n)


def eigen_spatial_instance(rng, holds: bool):
    """Symmetric W with X spanned by eigenvectors.

    For ``holds=True``, K vanishes on every eigen-direction with a nonzero
    eigenvalue, so the all-rho SMA condition is met.  Otherwise K also
    weighs such a direction, or X is perturbed off the eigenvectors.  A
    random rotation hides the eigenbasis in both cases.
    """
    n = int(rng.integers(6, 16)) * 2
    W = symmetric_weights(rng, n)
    lam, V = np.linalg.eigh(W)
    k = int(rng.integers(1, 5))
    idx = rng.choice(n, size=k, replace=False)
    zero_dirs = np.abs(lam[idx]) < 1e-12
    X = V[:, idx].copy()
    d = np.zeros(k)
    d[zero_dirs] = rng.random(zero_dirs.sum()) + 0.5
    mode = "holds" if holds else rng.choice(["penalty", "perturb"])
    if mode == "penalty":
        j = int(rng.integers(k))
        if zero_dirs[j]:
            free = np.setdiff1d(np.flatnonzero(np.abs(lam) > 1e-3), idx)
            X[:, j] = V[:, int(rng.choice(free))]
        d[j] = 1.0
    elif mode == "perturb":
        X = X + 0.1 * rng.standard_normal(X.shape)
    K = np.diag(d)
    R = np.linalg.qr(rng.standard_normal((k, k)))[0]
    return W, X @ R, R.T @ K @ R
