"""Hard-thresholding projection, support selection and the stationary equation.

For an iterate ``u = (z, d)`` and a working support ``T`` (|T| = s) the
stationary equation is ``F(u; T) = 0`` with::

    F(u; T) = [ d_T ; z_Tc ; d_T - grad_T l(z) ; d_Tc - grad_Tc l(z) ]

where ``Tc`` is the complement of ``T``. Supports are sorted 0-based index
arrays. Ties in the magnitude ranking are broken in favour of the smaller
index so that runs are reproducible.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import model
from .errors import ConditionError

__all__ = [
    "Iterate",
    "SupportSelection",
    "Stationarity",
    "as_support",
    "complement",
    "top_s_indices",
    "project_sparse",
    "select_support",
    "residual",
    "classify_stationary",
    "jacobian_dense",
    "jacobian_inverse_formula",
    "restricted_min_eigenvalue",
    "JACOBIAN_CAP",
]

JACOBIAN_CAP = 64


@dataclass
class Iterate:
    """Primal point ``z`` and gradient surrogate ``d``."""

    z: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.float64)
        self.d = np.asarray(self.d, dtype=np.float64)
        if self.z.ndim != 1 or self.z.shape != self.d.shape:
            raise ValueError("z and d must be 1-D vectors of equal length")


@dataclass(frozen=True)
class SupportSelection:
    support: np.ndarray
    tie_at_boundary: bool


class Stationarity(str, Enum):
    STRONG = "strong"
    PLAIN = "plain"
    NONE = "none"


def as_support(idx, p):
    """Validate and sort an index collection into a support array."""
    idx = np.unique(np.asarray(idx, dtype=np.intp))
    if idx.size and (idx[0] < 0 or idx[-1] >= p):
        raise ValueError(f"support index out of range for p={p}")
    return idx


def complement(T, p):
    mask = np.ones(p, dtype=bool)
    mask[T] = False
    return np.flatnonzero(mask)


def _check_s(s, p):
    if not (1 <= s <= p):
        raise ValueError(f"sparsity s={s} must satisfy 1 <= s <= p={p}")


def top_s_indices(a, s):
    """Indices of the ``s`` largest ``|a_i|`` (smaller index wins ties), sorted.

    Returns ``(indices, tie)`` where ``tie`` reports whether the s-th and
    (s+1)-th largest magnitudes coincide. Runs in O(p) apart from sorting
    the output.
    """
    mag = np.abs(np.asarray(a, dtype=np.float64))
    p = mag.size
    _check_s(s, p)
    if s == p:
        return np.arange(p), False
    # s-th largest magnitude
    kth = np.partition(mag, p - s)[p - s]
    above = np.flatnonzero(mag > kth)
    at = np.flatnonzero(mag == kth)
    need = s - above.size
    idx = np.sort(np.concatenate([above, at[:need]]))
    tie = at.size > need
    return idx, bool(tie)


def project_sparse(z, s):
    z = np.asarray(z, dtype=np.float64)
    idx, _ = top_s_indices(z, s)
    out = np.zeros_like(z)
    out[idx] = z[idx]
    return out


def select_support(u, tau, s):
    if tau <= 0:
        raise ValueError("tau must be positive")
    idx, tie = top_s_indices(u.z - tau * u.d, s)
    return SupportSelection(support=idx, tie_at_boundary=tie)


def residual(ds, u, T, grad=None):
    """Stacked residual ``F(u; T)`` (length 2p) and its Euclidean norm."""
    p = ds.p
    T = as_support(T, p)
    Tc = complement(T, p)
    if grad is None:
        grad = model.gradient(ds, u.z)
    diff = u.d - grad
    F = np.concatenate([u.d[T], u.z[Tc], diff[T], diff[Tc]])
    return F, float(np.linalg.norm(F))


def classify_stationary(ds, z, tau, s, tol=1e-8, grad=None):
    """Return STRONG, PLAIN or NONE for ``z`` at step size ``tau``.

    Zero tests use ``tol * max(1, ||grad||_inf)``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    z = np.asarray(z, dtype=np.float64)
    d = model.gradient(ds, z) if grad is None else grad
    eps = tol * max(1.0, float(np.max(np.abs(d))))
    supp = np.flatnonzero(z)
    k = supp.size
    if k > s:
        return Stationarity.NONE
    if k < s:
        # below full sparsity both notions reduce to grad = 0
        return Stationarity.STRONG if np.max(np.abs(d)) <= eps else Stationarity.NONE
    if supp.size and np.max(np.abs(d[supp])) > eps:
        return Stationarity.NONE
    off = np.abs(np.delete(d, supp))
    if off.size == 0:
        return Stationarity.STRONG
    bound = np.min(np.abs(z[supp])) / tau
    worst = float(off.max())
    if worst < bound - eps:
        return Stationarity.STRONG
    if worst <= bound + eps:
        return Stationarity.PLAIN
    return Stationarity.NONE


def _check_cap(p, cap):
    if p > cap:
        raise ValueError(f"dense Jacobian is verification-only: p={p} exceeds cap {cap}")


def _full_hessian(ds, z):
    return model.hessian_block(ds, z, np.arange(ds.p), np.arange(ds.p))


def jacobian_dense(ds, u, T, cap=JACOBIAN_CAP):
    """Jacobian of ``F(., T)`` with variables ordered [z_T, z_Tc, d_T, d_Tc]."""
    p = ds.p
    _check_cap(p, cap)
    T = as_support(T, p)
    Tc = complement(T, p)
    s, r = T.size, Tc.size
    H = _full_hessian(ds, u.z)
    order = np.concatenate([T, Tc])
    Hp = H[np.ix_(order, order)]
    J = np.zeros((2 * p, 2 * p))
    J[:s, p:p + s] = np.eye(s)
    J[s:p, s:p] = np.eye(r)
    J[p:, :p] = -Hp
    J[p:, p:] = np.eye(p)
    return J


def jacobian_inverse_formula(ds, u, T, cap=JACOBIAN_CAP, min_eig=1e-10):
    """Explicit block inverse of the Jacobian (requires X_T full column rank)."""
    p = ds.p
    _check_cap(p, cap)
    T = as_support(T, p)
    Tc = complement(T, p)
    s, r = T.size, Tc.size
    if restricted_min_eigenvalue(ds, T) <= min_eig:
        raise ConditionError("columns of X indexed by T are linearly dependent")
    H = _full_hessian(ds, u.z)
    H_TT = H[np.ix_(T, T)]
    H_TTc = H[np.ix_(T, Tc)]
    H_TcT = H[np.ix_(Tc, T)]
    H_TcTc = H[np.ix_(Tc, Tc)]
    try:
        A = np.linalg.inv(H_TT)
    except np.linalg.LinAlgError as exc:
        raise ConditionError("Hessian block on T is singular") from exc
    CA = H_TcT @ A
    R = -CA @ H_TTc + H_TcTc
    inv = np.zeros((2 * p, 2 * p))
    inv[:s, :s] = A
    inv[:s, s:p] = -A @ H_TTc
    inv[:s, p:p + s] = -A
    inv[s:p, s:p] = np.eye(r)
    inv[p:p + s, :s] = np.eye(s)
    inv[p + s:, :s] = CA
    inv[p + s:, s:p] = R
    inv[p + s:, p:p + s] = -CA
    inv[p + s:, p + s:] = np.eye(r)
    return inv


def restricted_min_eigenvalue(ds, T):
    """``lambda_min(X_T^T X_T)``, clipped at zero."""
    T = as_support(T, ds.p)
    if T.size == 0:
        return 0.0
    XT = ds.columns(T)
    return max(0.0, float(np.linalg.eigvalsh(XT.T @ XT)[0]))
