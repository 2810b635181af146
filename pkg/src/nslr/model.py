"""Logistic-loss kernels for sparsity-constrained logistic regression.

The loss is ``l(z) = (1/n) sum_i [ln(1 + exp(<x_i, z>)) - y_i <x_i, z>]`` with
labels ``y_i`` in {0, 1} and no intercept. All kernels work on dense arrays or
on CSR matrices; only column subsets of ``X`` are ever densified.
"""
from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh
from scipy.special import expit

from .errors import ConditionError, NumericalError

__all__ = [
    "Dataset",
    "ModelConstants",
    "sigmoid_probs",
    "loss",
    "gradient",
    "hessian_weights",
    "hessian_block",
    "constants",
    "linear_loss_bound",
    "svd_descent_point",
    "softplus",
]

LN2 = math.log(2.0)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix ``X`` (n x p, dense or CSR) with binary labels ``y``.

    Immutable after construction. ``c = 2y - 1`` are the signed labels.
    """

    X: object
    y: np.ndarray

    def __post_init__(self):
        X = self.X
        if sp.issparse(X):
            X = sp.csr_matrix(X, dtype=np.float64)
            X.sum_duplicates()
            X.sort_indices()
            data = X.data
        else:
            X = np.ascontiguousarray(X, dtype=np.float64)
            if X.ndim != 2:
                raise ValueError(f"X must be 2-D, got shape {X.shape}")
            data = X
        y = np.asarray(self.y, dtype=np.float64).ravel()
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValueError(f"X must be non-empty, got shape {X.shape}")
        if y.shape[0] != n:
            raise ValueError(f"y has length {y.shape[0]}, X has {n} rows")
        if not np.all(np.isfinite(data)):
            raise ValueError("X contains non-finite entries")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def is_sparse(self):
        return sp.issparse(self.X)

    @cached_property
    def c(self):
        return 2.0 * self.y - 1.0

    @cached_property
    def _csc(self):
        return self.X.tocsc()

    def matvec(self, z):
        return np.asarray(self.X @ z).ravel()

    def rmatvec(self, w):
        """``X^T w``; ``w`` may be (n,) or (n, k)."""
        out = self.X.T @ w
        return np.asarray(out)

    def columns(self, idx):
        """Dense n x len(idx) copy of the selected columns."""
        idx = np.asarray(idx, dtype=np.intp)
        if self.is_sparse:
            return self._csc[:, idx].toarray()
        return self.X[:, idx]

    def rows(self, idx):
        """Subset of samples as a new Dataset."""
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(self.X[idx], self.y[idx])

    def row_l1_norms(self):
        if self.is_sparse:
            return np.asarray(abs(self.X).sum(axis=1)).ravel()
        return np.abs(self.X).sum(axis=1)

    def toarray(self):
        return self.X.toarray() if self.is_sparse else self.X


@dataclass(frozen=True)
class ModelConstants:
    """Smoothness constant ``lambda_x`` and Hessian Lipschitz constant ``gamma_x``."""

    lambda_x: float
    gamma_x: float


def _check_z(ds, z):
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (ds.p,):
        raise ValueError(f"z must have shape ({ds.p},), got {z.shape}")
    return z


def _check_index(idx, p):
    idx = np.asarray(idx, dtype=np.intp).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= p):
        raise ValueError(f"index out of range for p={p}")
    return idx


def softplus(u):
    """``ln(1 + e^u)`` as ``max(u, 0) + ln(1 + e^-|u|)``."""
    u = np.asarray(u, dtype=np.float64)
    return np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))


def sigmoid_probs(ds, z):
    z = _check_z(ds, z)
    return expit(ds.matvec(z))


def _loss_from_margins(ds, t):
    # per-sample term equals softplus(-c_i t_i); avoids cancellation when l -> 0
    return float(np.mean(softplus(-ds.c * t)))


def _residual_from_margins(ds, t):
    # h - y computed as -c * sigmoid(-c t), accurate when h is close to y
    return -ds.c * expit(-ds.c * t)


def _weights_from_margins(t):
    return expit(t) * expit(-t)


def loss(ds, z):
    z = _check_z(ds, z)
    return _loss_from_margins(ds, ds.matvec(z))


def gradient(ds, z):
    """``X^T (h(z) - y) / n``."""
    z = _check_z(ds, z)
    r = _residual_from_margins(ds, ds.matvec(z))
    return ds.rmatvec(r) / ds.n


def hessian_weights(ds, z):
    """Diagonal of ``D(z)``: ``h_i (1 - h_i)``, each in (0, 1/4]."""
    z = _check_z(ds, z)
    return _weights_from_margins(ds.matvec(z))


def hessian_block(ds, z, rows, cols):
    """Block ``X_rows^T D(z) X_cols / n`` of the Hessian."""
    z = _check_z(ds, z)
    rows = _check_index(rows, ds.p)
    cols = _check_index(cols, ds.p)
    w = hessian_weights(ds, z)
    Xr = ds.columns(rows)
    Xc = Xr if np.array_equal(rows, cols) else ds.columns(cols)
    return Xr.T @ (w[:, None] * Xc) / ds.n


_DENSE_GRAM_MAX = 200


def _lambda_max(ds, tol=1e-8, max_iter=1000):
    """Largest eigenvalue of ``X^T X`` (equal to that of ``X X^T``).

    Small problems use a dense eigensolver on the smaller Gram matrix;
    larger ones run Lanczos through matrix-vector products only.
    """
    m = min(ds.n, ds.p)
    if m <= _DENSE_GRAM_MAX:
        G = ds.X.T @ ds.X if ds.p <= ds.n else ds.X @ ds.X.T
        if sp.issparse(G):
            G = G.toarray()
        return float(max(np.linalg.eigvalsh(G)[-1], 0.0))
    if ds.p <= ds.n:
        op = LinearOperator((ds.p, ds.p), matvec=lambda v: ds.rmatvec(ds.matvec(v)),
                            dtype=np.float64)
    else:
        op = LinearOperator((ds.n, ds.n), matvec=lambda v: ds.matvec(ds.rmatvec(v)),
                            dtype=np.float64)
    v0 = np.random.default_rng(0).standard_normal(m)
    try:
        vals = eigsh(op, k=1, which="LA", tol=tol, maxiter=max_iter, v0=v0,
                     return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        est = float(exc.eigenvalues[0]) if len(exc.eigenvalues) else float("nan")
        raise NumericalError(
            f"Lanczos did not reach rel. tol {tol} in {max_iter} iterations", estimate=est
        ) from exc
    return float(max(vals[0], 0.0))


def constants(ds, tol=1e-8, max_iter=1000):
    lam_x = _lambda_max(ds, tol, max_iter) / (4.0 * ds.n)
    gamma_x = 12.0 * lam_x * float(ds.row_l1_norms().max())
    return ModelConstants(lambda_x=lam_x, gamma_x=gamma_x)


def linear_loss_bound(ds, z):
    """Upper bound ``ln 2 - 1/4 + ||Xz - c||^2 / (4n)`` on the loss."""
    z = _check_z(ds, z)
    r = ds.matvec(z) - ds.c
    return LN2 - 0.25 + float(r @ r) / (4.0 * ds.n)


def svd_descent_point(ds, T, rank_tol=None):
    """Point supported on ``T`` with loss strictly below ``ln 2``.

    Uses ``z_T = V diag(1/sigma) U^T c`` from the thin SVD of ``X_T``.
    Raises ConditionError when ``X_T^T c = 0`` (then 0 is already a global
    minimizer) or when ``X_T`` does not have full column rank.
    """
    T = _check_index(T, ds.p)
    XT = ds.columns(T)
    if not np.any(XT.T @ ds.c):
        raise ConditionError("X_T^T c = 0; z = 0 is a global minimizer")
    U, sig, Vt = np.linalg.svd(XT, full_matrices=False)
    if rank_tol is None:
        rank_tol = max(XT.shape) * np.finfo(float).eps * (sig[0] if sig.size else 0.0)
    if sig.size < T.size or sig[-1] <= rank_tol:
        raise ConditionError("X_T is rank deficient")
    z = np.zeros(ds.p)
    z[T] = Vt.T @ ((U.T @ ds.c) / sig)
    return z
