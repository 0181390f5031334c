"""Discrete optimizer maps, continuous flows, and orbit generation.

All steppers are pure functions of their inputs and orbits are
immutable once built, so orbit generation across different starts or
parameters can run concurrently. A single orbit is an inherently
serial recurrence.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    BadMomentum,
    NoiseBoundViolated,
    NonFiniteGradient,
    NonFiniteState,
    OrbitTooLong,
)

MAX_ORBIT_POINTS = 10_000_000

ORBIT_KINDS = ("algorithm", "sampled_flow")

_REL_SLACK = 1e-9


@dataclass(frozen=True)
class PhasePoint:
    """Position/velocity pair for second-order dynamics."""

    position: np.ndarray
    velocity: np.ndarray

    @property
    def stacked(self):
        return np.concatenate([np.asarray(self.position, float), np.asarray(self.velocity, float)])

    @classmethod
    def from_stacked(cls, row):
        row = np.asarray(row, dtype=float)
        d = row.size // 2
        return cls(position=row[:d], velocity=row[d:])


@dataclass(frozen=True)
class MapParams:
    """Step size, viscosity and noise bound for the discrete maps."""

    h: float
    alpha: Optional[float] = None
    noise_bound: float = 0.0

    def __post_init__(self):
        if self.h <= 0.0:
            raise ValueError("step h must be positive")
        if self.noise_bound < 0.0:
            raise ValueError("noise bound must be nonnegative")
        if self.alpha is not None and not 0.0 <= self.momentum < 1.0:
            raise BadMomentum(f"momentum {self.momentum} outside [0, 1)")

    @property
    def momentum(self):
        if self.alpha is None:
            return None
        return 1.0 - self.h * self.alpha

    @property
    def step_squared(self):
        return self.h * self.h


@dataclass(frozen=True)
class Orbit:
    """Finite indexed state sequence with a fixed step size.

    ``states`` has one row per index; phase-space orbits stack
    (position, velocity) and record the position width in
    ``phase_dim``. Rows are read-only after construction.
    """

    states: np.ndarray
    h: float
    kind: str
    phase_dim: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ORBIT_KINDS:
            raise ValueError(f"kind must be one of {ORBIT_KINDS}")
        if self.states.ndim != 2 or self.states.shape[0] < 1:
            raise ValueError("orbit needs at least one state row")
        if not np.all(np.isfinite(self.states)):
            raise NonFiniteState("orbit contains non-finite entries")
        if self.h <= 0.0:
            raise ValueError("step h must be positive")
        self.states.flags.writeable = False

    def __len__(self):
        return self.states.shape[0]

    @property
    def positions(self):
        """Position rows (drops velocities on phase-space orbits)."""
        if self.phase_dim is None:
            return self.states
        return self.states[:, : self.phase_dim]

    def point(self, k):
        row = self.states[k]
        if self.phase_dim is None:
            return row
        return PhasePoint.from_stacked(row)


def _checked_grad(obj, x):
    g = np.atleast_1d(np.asarray(obj.grad(x), dtype=float))
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient(f"gradient not finite at {x!r}")
    return g


def gd_step(obj, h, x):
    """One gradient-descent step x - h * grad(x)."""
    if h <= 0.0:
        raise ValueError("step h must be positive")
    return np.asarray(x, dtype=float) - h * _checked_grad(obj, x)


def sgd_step(obj, h, x, noise, noise_bound):
    """Gradient step with a bounded additive gradient perturbation.

    With a zero noise vector this reproduces ``gd_step`` bitwise.
    """
    if h <= 0.0:
        raise ValueError("step h must be positive")
    noise = np.atleast_1d(np.asarray(noise, dtype=float))
    if float(np.linalg.norm(noise)) > noise_bound * (1.0 + _REL_SLACK):
        raise NoiseBoundViolated(
            f"noise norm {np.linalg.norm(noise):.6g} exceeds bound {noise_bound:.6g}"
        )
    return np.asarray(x, dtype=float) - h * (_checked_grad(obj, x) + noise)


def hb_step(obj, alpha, h, state):
    """Semi-implicit heavy-ball update in phase space.

    Velocity first, then position with the new velocity; the position
    sequence satisfies the two-term momentum recursion with momentum
    1 - h*alpha and effective step h^2.
    """
    beta = 1.0 - h * alpha
    if not 0.0 <= beta < 1.0:
        raise BadMomentum(f"momentum 1 - h*alpha = {beta} outside [0, 1)")
    g = _checked_grad(obj, state.position)
    velocity = state.velocity + h * (-alpha * state.velocity - g)
    position = state.position + h * velocity
    return PhasePoint(position=position, velocity=velocity)


def gd_map(obj, h):
    """Row stepper for gradient descent (validation hoisted out of the loop)."""
    if h <= 0.0:
        raise ValueError("step h must be positive")
    grad = obj.grad

    def step(x):
        g = grad(x)
        if not np.isfinite(g).all():
            raise NonFiniteGradient(f"gradient not finite at {x!r}")
        return x - h * g

    return step


def hb_map(obj, alpha, h):
    """Row stepper for heavy-ball on stacked (position, velocity) rows."""

    def step(row):
        nxt = hb_step(obj, alpha, h, PhasePoint.from_stacked(row))
        return nxt.stacked

    return step


# --- analytic flows for quadratics --------------------------------------


def flow_quadratic_gd(quad, t, y):
    """Exact descent flow of a quadratic: decays each eigenmode by e^{-lam t}."""
    y = np.asarray(y, dtype=float)
    w = quad.eigenvectors.T @ (y - quad.center)
    return quad.center + quad.eigenvectors @ (np.exp(-quad.eigenvalues * t) * w)


def sample_flow_quadratic_gd(quad, h, num_steps, y0):
    """Orbit of the descent flow sampled at times k*h, k = 0..num_steps.

    Each sample is evaluated directly at its own time (no compounding),
    so rows agree with pointwise flow evaluation to round-off.
    """
    _check_orbit_length(num_steps)
    y0 = np.asarray(y0, dtype=float)
    w0 = quad.eigenvectors.T @ (y0 - quad.center)
    times = h * np.arange(num_steps + 1)
    decay = np.exp(-np.outer(times, quad.eigenvalues))
    states = (decay * w0) @ quad.eigenvectors.T + quad.center
    return Orbit(states=states, h=h, kind="sampled_flow")


def _mode_propagator_entries(lam, alpha, times):
    """Entries of exp(t * [[0, 1], [-lam, -alpha]]) over an array of times.

    Uses the closed two-eigenvalue form (complex arithmetic covers the
    oscillatory case) and the defective-matrix limit with its t*e^{st}
    term at the critically damped point alpha^2 = 4*lam.
    """
    times = np.asarray(times, dtype=float)
    disc = alpha * alpha - 4.0 * lam
    if abs(disc) <= 1e-12 * max(1.0, alpha * alpha, abs(lam)):
        s = -0.5 * alpha
        decay = np.exp(s * times)
        return (
            decay * (1.0 + 0.5 * alpha * times),
            decay * times,
            decay * (-lam * times),
            decay * (1.0 - 0.5 * alpha * times),
        )
    root = np.sqrt(complex(disc))
    s1 = 0.5 * (-alpha + root)
    s2 = 0.5 * (-alpha - root)
    e1 = np.exp(s1 * times)
    e2 = np.exp(s2 * times)
    gap = s1 - s2
    e01 = (e1 - e2) / gap
    return (
        ((s1 * e2 - s2 * e1) / gap).real,
        e01.real,
        (-lam * e01).real,
        ((s1 * e1 - s2 * e2) / gap).real,
    )


def flow_quadratic_hb(quad, alpha, t, state):
    """Exact heavy-ball flow of a quadratic via per-mode 2x2 exponentials."""
    q = quad.eigenvectors.T @ (np.asarray(state.position, float) - quad.center)
    p = quad.eigenvectors.T @ np.asarray(state.velocity, float)
    q_out = np.empty_like(q)
    p_out = np.empty_like(p)
    for i, lam in enumerate(quad.eigenvalues):
        e00, e01, e10, e11 = _mode_propagator_entries(lam, alpha, t)
        q_out[i] = e00 * q[i] + e01 * p[i]
        p_out[i] = e10 * q[i] + e11 * p[i]
    return PhasePoint(
        position=quad.center + quad.eigenvectors @ q_out,
        velocity=quad.eigenvectors @ p_out,
    )


def sample_flow_quadratic_hb(quad, alpha, h, num_steps, state0):
    """Phase-space orbit of the heavy-ball flow sampled at times k*h.

    Each sample is evaluated directly at its own time, as in the
    first-order variant.
    """
    _check_orbit_length(num_steps)
    d = quad.dim
    q0 = quad.eigenvectors.T @ (np.asarray(state0.position, float) - quad.center)
    p0 = quad.eigenvectors.T @ np.asarray(state0.velocity, float)
    times = h * np.arange(num_steps + 1)
    q_modes = np.empty((num_steps + 1, d))
    p_modes = np.empty((num_steps + 1, d))
    for i, lam in enumerate(quad.eigenvalues):
        e00, e01, e10, e11 = _mode_propagator_entries(lam, alpha, times)
        q_modes[:, i] = e00 * q0[i] + e01 * p0[i]
        p_modes[:, i] = e10 * q0[i] + e11 * p0[i]
    states = np.hstack([q_modes @ quad.eigenvectors.T + quad.center, p_modes @ quad.eigenvectors.T])
    return Orbit(states=states, h=h, kind="sampled_flow", phase_dim=d)


# --- generic integrator --------------------------------------------------


def gd_vector_field(obj):
    """Descent field x' = -grad f(x)."""

    def field(x):
        return -_checked_grad(obj, x)

    return field


def hb_vector_field(obj, alpha):
    """Phase-space field (q', p') = (p, -alpha p - grad f(q)) on stacked rows."""
    d = obj.dim

    def field(row):
        q, p = row[:d], row[d:]
        return np.concatenate([p, -alpha * p - _checked_grad(obj, q)])

    return field


def rk4_flow(field, h, substeps, y):
    """Classical 4th-order Runge-Kutta over h seconds in `substeps` stages."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    y = np.asarray(y, dtype=float)
    dt = h / substeps
    for _ in range(substeps):
        k1 = field(y)
        k2 = field(y + 0.5 * dt * k1)
        k3 = field(y + 0.5 * dt * k2)
        k4 = field(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NonFiniteState("integrator state left the finite range")
    return y


def rk4_map(field, h, substeps):
    """Row stepper advancing the field by h seconds with RK4."""

    def step(y):
        return rk4_flow(field, h, substeps, y)

    return step


def choose_substeps(field, h, y0, defect_bound=None, max_inner=0.1):
    """Substep count with inner step <= max_inner and integrator error
    below defect_bound/100 (Richardson estimate at y0), so integration
    error cannot pollute defect measurements."""
    substeps = max(1, int(np.ceil(h / max_inner)))
    if defect_bound is None or defect_bound <= 0.0:
        return substeps
    budget = defect_bound / 100.0
    for _ in range(10):
        coarse = rk4_flow(field, h, substeps, y0)
        fine = rk4_flow(field, h, 2 * substeps, y0)
        err = float(np.linalg.norm(coarse - fine)) / 15.0
        if err <= budget:
            return substeps
        substeps *= 2
    return substeps


def _check_orbit_length(num_steps):
    if num_steps < 0:
        raise ValueError("iteration count must be >= 0")
    if num_steps + 1 > MAX_ORBIT_POINTS:
        raise OrbitTooLong(f"{num_steps + 1} points exceed cap {MAX_ORBIT_POINTS}")


def generate_orbit(stepper, start, num_steps, *, h, kind="algorithm"):
    """Orbit from iterating ``stepper`` num_steps times from ``start``.

    ``start`` may be a 1-D array or a PhasePoint; the stepper must map
    that state type to itself. Stepper errors propagate with the failing
    index attached as ``step_index``.
    """
    _check_orbit_length(num_steps)
    phase = isinstance(start, PhasePoint)
    state = start
    first = start.stacked if phase else np.atleast_1d(np.asarray(start, dtype=float))
    states = np.empty((num_steps + 1, first.size))
    states[0] = first
    for k in range(num_steps):
        try:
            state = stepper(state)
        except Exception as exc:
            exc.step_index = k
            raise
        states[k + 1] = state.stacked if phase else np.asarray(state, dtype=float)
    return Orbit(
        states=states,
        h=h,
        kind=kind,
        phase_dim=start.position.size if phase else None,
    )
