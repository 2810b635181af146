"""Self-check suite behind ``nslr verify``.

Each check draws small random instances, compares a kernel against an
independent route (finite differences, dense linear algebra, inequality
bounds) and reports the worst deviation seen.
"""
from dataclasses import dataclass

import numpy as np

from . import model, stationarity
from .data import Spec2, gen_example2
from .model import Dataset
from .solver import SolverConfig, nslr_solve
from .stationarity import Iterate

__all__ = ["CheckResult", "run_all", "CHECKS"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tol: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<32} worst={self.worst:.3e} tol={self.tol:.1e}"


def _instance(rng, n_max=30, p_max=12):
    n = int(rng.integers(3, n_max + 1))
    p = int(rng.integers(2, p_max + 1))
    X = rng.standard_normal((n, p))
    y = (rng.random(n) < 0.5).astype(float)
    z = rng.standard_normal(p) * 0.5
    return Dataset(X, y), z


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def check_gradient(rng, trials=50):
    worst = 0.0
    for _ in range(trials):
        ds, z = _instance(rng)
        h = 1e-5 * max(1.0, np.linalg.norm(z))
        fd = np.array([
            (model.loss(ds, z + h * e) - model.loss(ds, z - h * e)) / (2 * h)
            for e in np.eye(ds.p)
        ])
        worst = max(worst, _rel(model.gradient(ds, z), fd))
    return CheckResult("gradient vs finite differences", worst <= 1e-6, worst, 1e-6)


def check_hessian(rng, trials=50):
    worst = 0.0
    for _ in range(trials):
        ds, z = _instance(rng)
        T = np.sort(rng.choice(ds.p, size=max(1, ds.p // 2), replace=False))
        h = 1e-5 * max(1.0, np.linalg.norm(z))
        cols = []
        for j in T:
            e = np.zeros(ds.p)
            e[j] = h
            cols.append((model.gradient(ds, z + e)[T] - model.gradient(ds, z - e)[T]) / (2 * h))
        worst = max(worst, _rel(model.hessian_block(ds, z, T, T), np.column_stack(cols)))
    return CheckResult("hessian block vs finite diffs", worst <= 1e-5, worst, 1e-5)


def check_jacobian_inverse(rng, trials=20):
    worst = 0.0
    for _ in range(trials):
        p = int(rng.integers(3, 11))
        s = int(rng.integers(1, min(4, p - 1) + 1))
        n = int(rng.integers(p + 2, 30))
        ds = Dataset(rng.standard_normal((n, p)), (rng.random(n) < 0.5).astype(float))
        u = Iterate(rng.standard_normal(p), rng.standard_normal(p))
        T = stationarity.select_support(u, 1.0, s).support
        J = stationarity.jacobian_dense(ds, u, T)
        Jinv = stationarity.jacobian_inverse_formula(ds, u, T)
        worst = max(worst, float(np.max(np.abs(J @ Jinv - np.eye(2 * p)))))
    return CheckResult("jacobian x inverse formula = I", worst <= 1e-8, worst, 1e-8)


def check_bounds(rng, trials=100):
    """Smoothness, Hessian-Lipschitz and linear-regression bound; worst violation."""
    worst = 0.0
    for _ in range(trials):
        ds, z = _instance(rng, p_max=10)
        z2 = z + rng.standard_normal(ds.p)
        k = model.constants(ds)
        diff = z - z2
        upper = model.loss(ds, z2) + model.gradient(ds, z2) @ diff + 0.5 * k.lambda_x * diff @ diff
        worst = max(worst, model.loss(ds, z) - upper)
        H1 = model.hessian_block(ds, z, np.arange(ds.p), np.arange(ds.p))
        H2 = model.hessian_block(ds, z2, np.arange(ds.p), np.arange(ds.p))
        worst = max(worst, np.linalg.norm(H1 - H2) - k.gamma_x * np.linalg.norm(diff))
        worst = max(worst, model.loss(ds, z) - model.linear_loss_bound(ds, z))
    return CheckResult("loss bounds (violation)", worst <= 1e-10, max(worst, 0.0), 1e-10)


def check_fixed_point(rng):
    """A converged NSLR run is a fixed point of z -> P_S(z - tau grad)."""
    seed = int(rng.integers(0, 2**31))
    ds = gen_example2(Spec2(n=60, p=120, s=6, rho=0.5, seed=seed)).train
    rep = nslr_solve(ds, SolverConfig(s=6))
    z = rep.z_final
    fixed = stationarity.project_sparse(z - rep.tau_final * model.gradient(ds, z), 6)
    worst = float(np.max(np.abs(fixed - z))) if rep.converged else np.inf
    return CheckResult("nslr fixed-point certificate", worst <= 1e-5, worst, 1e-5)


CHECKS = (check_gradient, check_hessian, check_jacobian_inverse, check_bounds, check_fixed_point)


def run_all(seed=0):
    rng = np.random.default_rng(seed)
    return [check(rng) for check in CHECKS]
