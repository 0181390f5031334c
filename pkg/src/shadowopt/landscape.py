"""Objective functions, curvature metadata and dataset handling.

Objectives are immutable records of callables plus the curvature
constants the shadowing bounds consume. They are safe to evaluate
concurrently. Gradients are hand-coded per objective; there is no
automatic differentiation.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import BadLabel, EmptyDataset, NonSymmetric, ParseError

# max |phi''| for the loss phi(t) = 1/(1+e^t), attained at t = log(2 +- sqrt(3))
SIGMOID_CURVATURE_MAX = 1.0 / (6.0 * np.sqrt(3.0))

_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class Objective:
    """A differentiable scalar field with curvature metadata.

    ``value`` and ``grad`` map a point (1-D array) to a float / array.
    ``smoothness`` bounds the Hessian spectral norm; ``strong_convexity``
    is set only when the Hessian is bounded below by a positive constant
    everywhere; ``concavity`` is the magnitude of the least-negative
    eigenvalue floor when negative curvature is present;
    ``pert_smoothness`` carries the smoothness of a perturbation part on
    composite objectives.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    smoothness: float
    strong_convexity: Optional[float] = None
    concavity: Optional[float] = None
    pert_smoothness: Optional[float] = None


@dataclass(frozen=True)
class QuadraticSpec:
    """Symmetric Hessian plus center, carrying its eigendecomposition."""

    hessian: np.ndarray
    center: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return self.center.size

    @property
    def smoothness(self):
        return float(np.max(np.abs(self.eigenvalues)))

    @property
    def min_positive(self):
        """Smallest positive eigenvalue, or None if there is none."""
        pos = self.eigenvalues[self.eigenvalues > 0.0]
        return float(pos.min()) if pos.size else None

    @property
    def min_negative_magnitude(self):
        """Smallest |eigenvalue| among the negative ones, or None.

        This is the expansion floor of the descent dynamics: every
        negative eigenvalue lies at or below minus this value.
        """
        neg = self.eigenvalues[self.eigenvalues < 0.0]
        return float(np.abs(neg).min()) if neg.size else None


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (bias column included) and +-1 labels."""

    features: np.ndarray
    labels: np.ndarray

    @property
    def n(self):
        return self.labels.size

    @property
    def dim(self):
        return self.features.shape[1]


def _freeze(arr):
    arr = np.array(arr, dtype=float)
    arr.flags.writeable = False
    return arr


def _fix_eigenvector_signs(vecs):
    """First nonzero component of each eigenvector made positive."""
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0.0:
            vecs[:, j] = -col
    return vecs


def make_quadratic(hessian, center):
    """Quadratic objective 0.5 <x-c, H (x-c)> with spectral metadata.

    Returns (Objective, QuadraticSpec). The 1/2 factor makes the
    gradient exactly H (x-c). Raises NonSymmetric when the relative
    asymmetry of H exceeds 1e-12.
    """
    hessian = np.atleast_2d(np.asarray(hessian, dtype=float))
    center = np.atleast_1d(np.asarray(center, dtype=float))
    scale = max(1.0, float(np.linalg.norm(hessian)))
    asym = float(np.linalg.norm(hessian - hessian.T))
    if asym > _SYMMETRY_TOL * scale:
        raise NonSymmetric(f"relative asymmetry {asym / scale:.3e} exceeds {_SYMMETRY_TOL:g}")
    hessian = 0.5 * (hessian + hessian.T)

    eigenvalues, eigenvectors = np.linalg.eigh(hessian)
    eigenvectors = _fix_eigenvector_signs(eigenvectors)
    spec = QuadraticSpec(
        hessian=_freeze(hessian),
        center=_freeze(center),
        eigenvalues=_freeze(eigenvalues),
        eigenvectors=_freeze(eigenvectors),
    )

    def value(x):
        w = np.asarray(x, dtype=float) - center
        return 0.5 * float(w @ (hessian @ w))

    def grad(x):
        return hessian @ (np.asarray(x, dtype=float) - center)

    strongly_convex = bool(np.all(eigenvalues > 0.0))
    obj = Objective(
        dim=center.size,
        value=value,
        grad=grad,
        smoothness=spec.smoothness,
        strong_convexity=spec.min_positive if strongly_convex else None,
        concavity=spec.min_negative_magnitude,
    )
    return obj, spec


def _sigmoid_loss(t):
    """phi(t) = 1/(1+e^t), computed without overflow."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0.0
    e = np.exp(-t[pos])
    out[pos] = e / (1.0 + e)
    out[~pos] = 1.0 / (1.0 + np.exp(t[~pos]))
    return out


def make_sigmoid_erm(data, reg):
    """Regularized sigmoid-loss empirical risk over +-1 labelled data.

    f(x) = reg/2 ||x||^2 + mean_i phi(<a_i, x> l_i) with
    phi(t) = 1/(1+e^t). The smoothness estimate is
    reg + mean ||a_i||^2 * max|phi''|; the strong-convexity field is set
    only when the regularizer provably dominates the negative curvature
    of the data term.
    """
    if data.n < 1:
        raise EmptyDataset("sigmoid ERM needs at least one sample")
    reg = float(reg)
    feats = data.features
    labels = data.labels
    n = data.n

    def value(x):
        x = np.asarray(x, dtype=float)
        margins = (feats @ x) * labels
        return 0.5 * reg * float(x @ x) + float(np.mean(_sigmoid_loss(margins)))

    def grad(x):
        x = np.asarray(x, dtype=float)
        margins = (feats @ x) * labels
        p = _sigmoid_loss(margins)
        dphi = -p * (1.0 - p)
        return reg * x + (feats.T @ (dphi * labels)) / n

    data_curv = float(np.mean(np.sum(feats**2, axis=1))) * SIGMOID_CURVATURE_MAX
    mu = reg - data_curv
    return Objective(
        dim=data.dim,
        value=value,
        grad=grad,
        smoothness=reg + data_curv,
        strong_convexity=mu if mu > 0.0 else None,
    )


def _hosaki_poly(u):
    return 1.0 - 8.0 * u + 7.0 * u**2 - (7.0 / 3.0) * u**3 + 0.25 * u**4


def _hosaki_poly_d1(u):
    return -8.0 + 14.0 * u - 7.0 * u**2 + u**3


def _hosaki_poly_d2(u):
    return 14.0 - 14.0 * u + 3.0 * u**2


@lru_cache(maxsize=1)
def _hosaki_curvature_bound():
    """Max Hessian spectral norm on the reference box [0,5] x [0,6]."""
    u = np.linspace(0.0, 5.0, 251)[:, None]
    v = np.linspace(0.0, 6.0, 301)[None, :]
    ev = np.exp(-v)
    fuu = _hosaki_poly_d2(u) * v**2 * ev
    fuv = _hosaki_poly_d1(u) * (2.0 * v - v**2) * ev
    fvv = _hosaki_poly(u) * (2.0 - 4.0 * v + v**2) * ev
    # spectral norm of a symmetric 2x2: |mean of diag| + radius
    radius = np.hypot(0.5 * (fuu - fvv), fuv)
    top = np.maximum(np.abs(0.5 * (fuu + fvv) + radius), np.abs(0.5 * (fuu + fvv) - radius))
    return float(top.max())


def make_hosaki():
    """Two-dimensional multi-basin benchmark with a saddle at (2, 2).

    f(u, v) = (1 - 8u + 7u^2 - 7u^3/3 + u^4/4) v^2 e^{-v}; global
    minimum at (4, 2). The smoothness constant is estimated on the
    box [0,5] x [0,6] where the landscape is normally studied.
    """

    def value(x):
        u, v = np.float64(x[0]), np.float64(x[1])
        return _hosaki_poly(u) * v**2 * np.exp(-v)

    def grad(x):
        u, v = np.float64(x[0]), np.float64(x[1])
        ev = np.exp(-v)
        return np.array(
            [
                _hosaki_poly_d1(u) * v**2 * ev,
                _hosaki_poly(u) * (2.0 * v - v**2) * ev,
            ]
        )

    return Objective(dim=2, value=value, grad=grad, smoothness=_hosaki_curvature_bound())


def add_perturbation(quad_obj, pert):
    """Composite objective g = f + phi for a quadratic f.

    Keeps f's curvature constants and records phi's smoothness in
    ``pert_smoothness``, which is how the perturbed-saddle bounds
    consume the pair.
    """
    if quad_obj.dim != pert.dim:
        raise ValueError("dimension mismatch between objective and perturbation")

    def value(x):
        return quad_obj.value(x) + pert.value(x)

    def grad(x):
        return quad_obj.grad(x) + pert.grad(x)

    return Objective(
        dim=quad_obj.dim,
        value=value,
        grad=grad,
        smoothness=quad_obj.smoothness + pert.smoothness,
        strong_convexity=quad_obj.strong_convexity,
        concavity=quad_obj.concavity,
        pert_smoothness=pert.smoothness,
    )


def _with_bias(features):
    ones = np.ones((features.shape[0], 1))
    return np.hstack([features, ones])


def load_dataset_csv(path):
    """Dataset from CSV rows of floats with a trailing +-1 label.

    One sample per line, no header. A bias column of ones is appended
    to the features and never stored back.
    """
    rows = []
    labels = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
                if width < 2:
                    raise ParseError(lineno, "need at least one feature and a label")
            elif len(fields) != width:
                raise ParseError(lineno, f"expected {width} fields, got {len(fields)}")
            try:
                values = [float(f) for f in fields]
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from exc
            label = values[-1]
            if label not in (1.0, -1.0):
                raise BadLabel(lineno, label)
            if not all(np.isfinite(values[:-1])):
                raise ParseError(lineno, "non-finite feature value")
            rows.append(values[:-1])
            labels.append(label)
    if not rows:
        raise EmptyDataset(f"no samples in {path}")
    features = _with_bias(np.asarray(rows, dtype=float))
    return Dataset(features=_freeze(features), labels=_freeze(labels))


def generate_synthetic(n, d, seed):
    """Two Gaussian clusters labelled by cluster sign, plus bias column.

    Deterministic under the seed: labels are drawn first, then the
    feature noise, so identical (n, d, seed) gives identical datasets.
    """
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=n) * 2 - 1
    direction = np.ones(d) / np.sqrt(d)
    offset = 1.5 * direction
    features = labels[:, None] * offset + 0.2 * rng.standard_normal((n, d))
    return Dataset(
        features=_freeze(_with_bias(features)),
        labels=_freeze(labels.astype(float)),
    )
