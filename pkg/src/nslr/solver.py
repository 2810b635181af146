"""Newton iteration on the stationary equation (NSLR) and an IHT baseline.

Each NSLR step solves only an s x s system on the current working support,
so the per-iteration cost is O(s^3 + s^2 n + n p); no p x p matrix is formed.
"""
from dataclasses import dataclass, field
import logging
import time

import numpy as np
import scipy.linalg

from . import model
from .errors import NumericalError
from .stationarity import (
    Iterate,
    Stationarity,
    as_support,
    classify_stationary,
    complement,
    select_support,
)

__all__ = [
    "SolverConfig",
    "IterationRecord",
    "SolverReport",
    "newton_step",
    "tau_update",
    "nslr_solve",
    "iht_solve",
    "initial_prev_support",
]

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    s: int
    tau0: float = 1.0
    tau_decay: float = 0.1
    epsilon: float = 1e-6
    max_iter: int = 1000
    ridge_mu: float = 1e-10
    z0: np.ndarray = None

    def validate(self, p):
        if not (1 <= self.s <= p):
            raise ValueError(f"s={self.s} must satisfy 1 <= s <= p={p}")
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")
        if not (0 < self.tau_decay < 1):
            raise ValueError("tau_decay must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if self.ridge_mu < 0:
            raise ValueError("ridge_mu must be non-negative")
        if self.z0 is not None:
            z0 = np.asarray(self.z0, dtype=np.float64)
            if z0.shape != (p,):
                raise ValueError(f"z0 must have shape ({p},)")
            if np.count_nonzero(z0) > self.s:
                raise ValueError("z0 has more than s nonzeros")

    def initial_point(self, p):
        if self.z0 is None:
            return np.zeros(p)
        return np.array(self.z0, dtype=np.float64)

    def snapshot(self):
        return {
            "s": self.s,
            "tau0": self.tau0,
            "tau_decay": self.tau_decay,
            "epsilon": self.epsilon,
            "max_iter": self.max_iter,
            "ridge_mu": self.ridge_mu,
            "z0": "zeros" if self.z0 is None else "custom",
        }


@dataclass
class IterationRecord:
    k: int
    residual: float
    tau: float
    support: np.ndarray
    loss: float
    grad_norm: float
    elapsed: float

    def to_dict(self):
        return {
            "k": self.k,
            "residual": self.residual,
            "tau": self.tau,
            "support": (self.support + 1).tolist(),  # 1-based in logs
            "loss": self.loss,
            "grad_norm": self.grad_norm,
            "elapsed": self.elapsed,
        }


@dataclass
class SolverReport:
    solver: str
    z_final: np.ndarray
    converged: bool
    iterations: int
    tau_final: float
    stationarity_class: Stationarity
    tie_flag: bool
    time_seconds: float
    loss: float
    grad_norm: float
    trace: list = field(default_factory=list)
    error: str = None
    epsilon: float = 1e-6

    @property
    def nnz(self):
        return int(np.count_nonzero(self.z_final))

    @property
    def residuals(self):
        return np.array([r.residual for r in self.trace])

    @property
    def global_minimizer(self):
        """Converged with ``||grad l|| <= epsilon``: no better feasible point exists."""
        return self.converged and self.grad_norm <= self.epsilon

    @property
    def certificate(self):
        """Stationarity label, marked conditional when the final support had ties."""
        label = self.stationarity_class.value
        return f"{label} (conditional on tie set)" if self.tie_flag else label


def initial_prev_support(z0, s):
    """Support of ``z0`` padded to size ``s`` with the smallest unused indices."""
    supp = np.flatnonzero(z0)
    if supp.size >= s:
        return supp
    rest = complement(supp, z0.size)[: s - supp.size]
    return np.sort(np.concatenate([supp, rest]))


def _solve_reduced(H, rhs, ridge_mu, T):
    try:
        factor = scipy.linalg.cho_factor(H, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        log.debug("reduced Hessian not positive definite; adding ridge %g", ridge_mu)
        try:
            factor = scipy.linalg.cho_factor(
                H + ridge_mu * np.eye(H.shape[0]), lower=True, check_finite=False
            )
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "reduced Hessian block singular even after ridge", support=T
            ) from exc
    v = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    if not np.all(np.isfinite(v)):
        raise NumericalError("non-finite Newton solution", support=T)
    return v


def _newton_update(ds, z, d, grad, margins, T, T_prev, ridge_mu):
    """One Newton step given ``grad = grad l(z)`` and ``margins = X z``.

    Returns ``(z_new, margins_new, wstep)`` where ``wstep = D(z) X (z_new - z)``;
    the caller forms ``d_new = grad + X^T wstep / n`` and zeroes it on ``T``.
    """
    n = ds.n
    w = model._weights_from_margins(margins)
    XT = ds.columns(T)
    WXT = w[:, None] * XT
    H = XT.T @ WXT / n
    # H_{T,T_prev} z_{T_prev} = X_T^T D X z / n since supp(z) lies in T_prev
    rhs = XT.T @ (w * margins) / n - grad[T]
    v = _solve_reduced(H, rhs, ridge_mu, T)

    z_new = np.zeros_like(z)
    z_new[T] = v
    changed = np.union1d(T, T_prev)
    step = z_new[changed] - z[changed]
    Xstep = ds.columns(changed) @ step
    return z_new, margins + Xstep, w * Xstep


def newton_step(ds, u, T, T_prev, ridge_mu=1e-10, grad=None):
    """Newton update of ``u = (z, d)`` on working support ``T``.

    ``T_prev`` must contain ``supp(z)``. Returns the next Iterate, with
    ``z`` zero off ``T`` and ``d`` zero on ``T``.
    """
    p = ds.p
    T = as_support(T, p)
    T_prev = as_support(T_prev, p)
    z = np.asarray(u.z, dtype=np.float64)
    outside = np.ones(p, dtype=bool)
    outside[T_prev] = False
    if np.any(z[outside]):
        raise ValueError("supp(z) must be contained in T_prev")
    margins = ds.matvec(z)
    if grad is None:
        grad = ds.rmatvec(model._residual_from_margins(ds, margins)) / ds.n
    z_new, _, wstep = _newton_update(ds, z, u.d, grad, margins, T, T_prev, ridge_mu)
    d_new = grad + ds.rmatvec(wstep) / ds.n
    d_new[T] = 0.0
    return Iterate(z_new, d_new)


def tau_update(tau_k, z_k, d_k, T_k, residual_norm, k, decay=0.1):
    """Shrink ``tau`` by ``decay`` when it exceeds the strong-stationarity bound
    ``[z]_s / max_{j not in T} |d_j|`` and the residual is above ``1/k``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    s = len(T_k)
    p = z_k.size
    Tc = complement(np.asarray(T_k, dtype=np.intp), p)
    dmax = float(np.max(np.abs(d_k[Tc]))) if Tc.size else 0.0
    if dmax == 0.0:
        return tau_k
    zs = float(np.partition(np.abs(z_k), p - s)[p - s])
    if tau_k >= zs / dmax and residual_norm > 1.0 / k:
        return decay * tau_k
    return tau_k


def _finish(name, ds, cfg, z, tau, tie, trace, converged, k, t0, grad, margins, error=None):
    elapsed = time.perf_counter() - t0
    gnorm = float(np.linalg.norm(grad))
    cls = classify_stationary(ds, z, tau, cfg.s, tol=10 * cfg.epsilon, grad=grad)
    report = SolverReport(
        solver=name,
        z_final=z,
        converged=converged,
        iterations=k,
        tau_final=tau,
        stationarity_class=cls,
        tie_flag=tie,
        time_seconds=elapsed,
        loss=model._loss_from_margins(ds, margins),
        grad_norm=gnorm,
        trace=trace,
        error=error,
        epsilon=cfg.epsilon,
    )
    return report


def nslr_solve(ds, cfg):
    """Run NSLR from ``cfg.z0`` (default zero) until ``||F|| < epsilon``."""
    p, n = ds.p, ds.n
    cfg.validate(p)
    s = cfg.s
    t0 = time.perf_counter()

    z = cfg.initial_point(p)
    margins = ds.matvec(z)
    grad = ds.rmatvec(model._residual_from_margins(ds, margins)) / n
    d = grad.copy()
    T_prev = initial_prev_support(z, s)
    tau = cfg.tau0
    trace = []
    converged = False
    tie = False
    error = None
    k = 0
    while True:
        sel = select_support(Iterate(z, d), tau, s)
        T, tie = sel.support, sel.tie_at_boundary
        Tc = complement(T, p)
        diff = d - grad
        res = float(np.sqrt(d[T] @ d[T] + z[Tc] @ z[Tc] + diff @ diff))
        trace.append(
            IterationRecord(
                k=k,
                residual=res,
                tau=tau,
                support=T,
                loss=model._loss_from_margins(ds, margins),
                grad_norm=float(np.linalg.norm(grad)),
                elapsed=time.perf_counter() - t0,
            )
        )
        log.debug("nslr k=%d residual=%.3e tau=%.3e", k, res, tau)
        if res < cfg.epsilon:
            converged = True
            break
        if k >= cfg.max_iter:
            break
        tau_next = tau_update(tau, z, d, T, res, k + 1, cfg.tau_decay)
        try:
            z_new, margins_new, wstep = _newton_update(
                ds, z, d, grad, margins, T, T_prev, cfg.ridge_mu
            )
        except NumericalError as exc:
            error = f"{exc} (support={(T + 1).tolist()})"
            log.warning("nslr aborted at k=%d: %s", k, exc)
            break
        # one pass over X^T for both the next gradient and the d update
        stacked = np.column_stack(
            [model._residual_from_margins(ds, margins_new), wstep]
        )
        prod = ds.rmatvec(stacked) / n
        d = grad + prod[:, 1]
        d[T] = 0.0
        grad = np.ascontiguousarray(prod[:, 0])
        z, margins, T_prev, tau = z_new, margins_new, T, tau_next
        k += 1
    return _finish("nslr", ds, cfg, z, tau, tie, trace, converged, k, t0, grad, margins, error)


def iht_solve(ds, cfg, lambda_x=None):
    """Projected gradient ``z <- P_S(z - tau grad l(z))`` with fixed
    ``tau = min(tau0, 1/lambda_x)``; stops on the same residual as NSLR."""
    p, n = ds.p, ds.n
    cfg.validate(p)
    s = cfg.s
    if lambda_x is None:
        lambda_x = model.constants(ds).lambda_x
    t0 = time.perf_counter()
    tau = cfg.tau0 if lambda_x <= 0 else min(cfg.tau0, 1.0 / lambda_x)

    z = cfg.initial_point(p)
    margins = ds.matvec(z)
    grad = ds.rmatvec(model._residual_from_margins(ds, margins)) / n
    trace = []
    converged = False
    tie = False
    k = 0
    while True:
        sel = select_support(Iterate(z, grad), tau, s)
        T, tie = sel.support, sel.tie_at_boundary
        Tc = complement(T, p)
        # d = grad exactly, so only the first two residual blocks survive
        res = float(np.sqrt(grad[T] @ grad[T] + z[Tc] @ z[Tc]))
        trace.append(
            IterationRecord(
                k=k,
                residual=res,
                tau=tau,
                support=T,
                loss=model._loss_from_margins(ds, margins),
                grad_norm=float(np.linalg.norm(grad)),
                elapsed=time.perf_counter() - t0,
            )
        )
        if res < cfg.epsilon:
            converged = True
            break
        if k >= cfg.max_iter:
            break
        z_new = np.zeros_like(z)
        z_new[T] = z[T] - tau * grad[T]
        changed = np.union1d(T, np.flatnonzero(z))
        margins = margins + ds.columns(changed) @ (z_new[changed] - z[changed])
        z = z_new
        grad = ds.rmatvec(model._residual_from_margins(ds, margins)) / n
        k += 1
    return _finish("iht", ds, cfg, z, tau, tie, trace, converged, k, t0, grad, margins)
