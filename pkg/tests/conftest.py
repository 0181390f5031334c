"""Shared numeric oracles for the test suite.

The finite-difference gradient and the random quadratic factory are
the independent checks the library-side code is verified against; they
deliberately avoid the package's own gradient/eigen plumbing.
"""

import numpy as np


def fd_gradient(value_fn, x, rel_step=1e-6):
    """Central finite differences with step rel_step * (1 + ||x||)."""
    x = np.asarray(x, dtype=float)
    step = rel_step * (1.0 + np.linalg.norm(x))
    grad = np.empty_like(x)
    for i in range(x.size):
        plus = x.copy()
        minus = x.copy()
        plus[i] += step
        minus[i] -= step
        grad[i] = (value_fn(plus) - value_fn(minus)) / (2.0 * step)
    return grad


def assert_grad_matches_fd(obj, points, rel_tol=1e-5):
    for x in points:
        analytic = np.asarray(obj.grad(x), dtype=float)
        numeric = fd_gradient(obj.value, x)
        scale = max(1.0, np.linalg.norm(analytic))
        assert np.linalg.norm(analytic - numeric) <= rel_tol * scale, (
            f"gradient mismatch at {x}: {analytic} vs {numeric}"
        )


def random_spd_hessian(rng, dim, lo=0.5, hi=5.0):
    """Random symmetric positive definite matrix with spectrum in [lo, hi]."""
    basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    spectrum = rng.uniform(lo, hi, size=dim)
    return basis @ np.diag(spectrum) @ basis.T
