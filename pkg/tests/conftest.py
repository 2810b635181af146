import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nslr.model import Dataset

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# filled by tests/test_acceptance.py; printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {key:>2}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dataset(rng, n, p, scale=1.0):
    X = rng.standard_normal((n, p)) * scale
    y = (rng.random(n) < 0.5).astype(float)
    return Dataset(X, y)


@pytest.fixture
def worked_example():
    """3 x 3 design with y = (0, 1, 1) and candidate point z = (1, -1, 0)."""
    X = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return Dataset(X, np.array([0.0, 1.0, 1.0])), np.array([1.0, -1.0, 0.0])


def dense_newton_minimizer(X, y, iters=100):
    """Unconstrained logistic minimizer by damped Newton on the full Hessian."""
    n, p = X.shape
    z = np.zeros(p)

    def f(v):
        t = X @ v
        return np.mean(np.logaddexp(0, t) - y * t)

    for _ in range(iters):
        t = X @ z
        h = 1 / (1 + np.exp(-t))
        g = X.T @ (h - y) / n
        if np.linalg.norm(g) < 1e-14:
            break
        H = X.T @ (X * (h * (1 - h))[:, None]) / n
        step = np.linalg.solve(H, g)
        a = 1.0
        while f(z - a * step) > f(z) and a > 1e-8:
            a *= 0.5
        z = z - a * step
    return z


def sparse_minimizer_instance(rng, n=40, informative=2, extra=2):
    """Dataset whose unconstrained minimizer is zero on the last ``extra`` features.

    The extra columns are orthogonal to ``h(w) - y`` at the minimizer ``w`` of
    the informative block, so ``(w, 0)`` is stationary for the full problem.
    """
    Xa = rng.standard_normal((n, informative))
    y = (rng.random(n) < 1 / (1 + np.exp(-Xa @ np.full(informative, 0.7)))).astype(float)
    w = dense_newton_minimizer(Xa, y)
    r = 1 / (1 + np.exp(-Xa @ w)) - y
    B = rng.standard_normal((n, extra))
    B -= np.outer(r, r @ B) / (r @ r)
    X = np.hstack([Xa, B])
    z_star = np.concatenate([w, np.zeros(extra)])
    return Dataset(X, y), z_star
