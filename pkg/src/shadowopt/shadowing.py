"""Defect measurement, tracking-radius bounds, and shadow constructions.

A sampled flow trajectory viewed through an optimizer map is a
pseudo-orbit: its one-step residuals (defects) are small but nonzero.
This module measures those defects, evaluates the closed-form bounds
that hold in each curvature regime, and constructs the genuine map
orbit (the shadow) staying uniformly close to the samples:

* contraction: iterate forward from the same start;
* expansion: pick the start by iterating the last sample backward;
* linear hyperbolic: combine the two constructions per subspace;
* perturbed hyperbolic: fixed-point iteration of a forward/backward
  variation-of-constants operator on sequence space;
* bounded gradient noise: perturbed-map orbit from the same start.

All operations are pure given their inputs; the fixed-point iteration
mutates only its private iterate buffer.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import Orbit, gd_map, generate_orbit, sgd_step
from .errors import (
    BadMomentum,
    BoundaryTooFar,
    FixedPointNotConverged,
    NoiseDominates,
    NotContracting,
    NotExpanding,
    NotHyperbolic,
    NotStronglyConvex,
    PerturbationTooLarge,
    SingularMap,
    StepTooLarge,
)

# Empirical gradient maxima are inflated by this factor so that peaks
# between flow samples stay covered.
ELL_SAFETY = 1.1

# Eigenvalue moduli within this band around 1 refuse to pick a side.
TOL_HYPERBOLIC = 1e-8

FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITERS = 10_000
FIXED_POINT_RESIDUAL_TOL = 1e-9
_DIVERGENCE_PATIENCE = 10

_REL_SLACK = 1e-9

REGIMES = ("contraction", "expansion", "hyperbolic", "perturbed", "convex_growth", "sgd")


@dataclass(frozen=True)
class DefectReport:
    """Per-step residuals of a candidate pseudo-orbit against a map."""

    per_step_defects: np.ndarray
    max_defect: float
    predicted_bound: Optional[float] = None


@dataclass(frozen=True)
class ShadowReport:
    """A constructed shadow orbit and how closely it tracks the samples."""

    shadow: Orbit
    deviations: np.ndarray
    max_deviation: float
    predicted_radius: float
    regime: str
    iterations_used: int = 0
    defect: Optional[DefectReport] = None
    euclidean_norm_caveat: bool = False
    fp_change_history: tuple = field(default=())


@dataclass(frozen=True)
class HyperbolicSplitting:
    """Orthogonal invariant splitting of a symmetric linear map."""

    stable_basis: np.ndarray
    unstable_basis: np.ndarray
    stable_rate: float
    unstable_rate: float
    stable_eigenvalues: np.ndarray
    unstable_eigenvalues: np.ndarray


@dataclass(frozen=True)
class Rates:
    """Constants feeding the bound formulas for one experiment."""

    grad_bound: float
    smoothness: float
    strong_convexity: Optional[float]
    concavity: Optional[float]
    pert_smoothness: Optional[float]
    h: float
    alpha: Optional[float] = None
    noise_bound: float = 0.0


@dataclass(frozen=True)
class ModeRoots:
    """Characteristic roots of one curvature mode of the momentum map."""

    curvature: float
    roots: tuple
    moduli: tuple


@dataclass(frozen=True)
class HBHyperbolicity:
    """Verdict and per-mode roots of the heavy-ball hyperbolicity test."""

    hyperbolic: bool
    modes: tuple


def estimate_grad_bound(obj, orbit):
    """Inflated max gradient norm along the stored orbit points.

    The result is 1.1x the empirical maximum (ELL_SAFETY); it is always
    computed from a concrete orbit, never assumed.
    """
    norms = [float(np.linalg.norm(obj.grad(pos))) for pos in orbit.positions]
    return ELL_SAFETY * max(norms)


def collect_rates(obj, orbit, h, alpha=None, noise_bound=0.0):
    """Bundle the bound-formula constants for one objective and orbit."""
    return Rates(
        grad_bound=estimate_grad_bound(obj, orbit),
        smoothness=obj.smoothness,
        strong_convexity=obj.strong_convexity,
        concavity=obj.concavity,
        pert_smoothness=obj.pert_smoothness,
        h=h,
        alpha=alpha,
        noise_bound=noise_bound,
    )


def measure_defect(stepper, orbit, predicted_bound=None):
    """Per-step residuals ||y_{k+1} - Psi(y_k)|| of an orbit against a map."""
    states = orbit.states
    if states.shape[0] < 2:
        raise ValueError("defect measurement needs an orbit of length >= 2")
    defects = np.empty(states.shape[0] - 1)
    for k in range(states.shape[0] - 1):
        defects[k] = np.linalg.norm(states[k + 1] - stepper(states[k]))
    return DefectReport(
        per_step_defects=defects,
        max_defect=float(defects.max()),
        predicted_bound=predicted_bound,
    )


# --- closed-form bounds ---------------------------------------------------


def bound_defect_gd(ell, smooth, h):
    """Per-step defect bound ell * smooth * h^2 / 2 for descent sampling."""
    return 0.5 * ell * smooth * h * h


def bound_defect_hb(ell, smooth, alpha, h):
    """Phase-space defect bound ell * (alpha + 1 + smooth) * h^2."""
    return ell * (alpha + 1.0 + smooth) * h * h


def bound_radius_sc(h, ell, smooth, mu):
    """Tracking radius h * ell * smooth / (2 mu) under strong convexity."""
    if mu is None or mu <= 0.0:
        raise NotStronglyConvex("radius formula needs a strong-convexity constant")
    return h * ell * smooth / (2.0 * mu)


def bound_step_sc(eps, ell, smooth, mu):
    """Largest step min{2 mu eps / (smooth ell), 1/smooth} for radius eps."""
    if mu is None or mu <= 0.0:
        raise NotStronglyConvex("step bound needs a strong-convexity constant")
    return min(2.0 * mu * eps / (smooth * ell), 1.0 / smooth)


def bound_step_saddle(eps, ell, smooth, mu, gamma):
    """Step bound min{mu eps, gamma eps / 2, ...} near a clean saddle."""
    return min(
        mu * eps / (smooth * ell),
        gamma * eps / (2.0 * smooth * ell),
        1.0 / smooth,
    )


def bound_step_perturbed(eps, ell, smooth, mu, gamma, pert):
    """Step bound for a perturbed saddle; needs 2 pert < min{mu, gamma/2}."""
    floor = min(mu, 0.5 * gamma)
    if 2.0 * pert >= floor:
        raise PerturbationTooLarge(
            f"2*pert = {2.0 * pert:.6g} is not below min(mu, gamma/2) = {floor:.6g}"
        )
    return eps * (floor - 4.0 * pert) / (2.0 * ell * smooth)


def bound_step_sgd(eps, ell, smooth, mu, noise):
    """Step bound 2 (mu eps - noise) / (ell smooth) under gradient noise."""
    if mu is None or mu <= 0.0:
        raise NotStronglyConvex("noisy step bound needs strong convexity")
    if mu * eps <= noise:
        raise NoiseDominates(
            f"noise bound {noise:.6g} >= mu * eps = {mu * eps:.6g}"
        )
    return 2.0 * (mu * eps - noise) / (ell * smooth)


def bound_convex_growth(delta, k):
    """Linear deviation envelope delta * k for non-expanding maps."""
    return delta * k


# --- shadow constructions -------------------------------------------------


def _deviations(shadow_states, pseudo_states):
    return np.linalg.norm(shadow_states - pseudo_states, axis=1)


def shadow_contraction(stepper, pseudo_orbit, rho):
    """Shadow of a pseudo-orbit under a rho-contraction: same start.

    Errors made along the pseudo-orbit shrink geometrically, so the map
    orbit from x_0 = y_0 stays within max_defect / (1 - rho) of every
    sample; the report carries that radius next to the observed one.
    """
    if rho >= 1.0:
        raise NotContracting(f"contraction factor {rho} must be < 1")
    defect = measure_defect(stepper, pseudo_orbit)
    radius = defect.max_defect / (1.0 - rho)
    num_steps = len(pseudo_orbit) - 1
    shadow = generate_orbit(
        stepper, pseudo_orbit.states[0], num_steps, h=pseudo_orbit.h
    )
    deviations = _deviations(shadow.states, pseudo_orbit.states)
    return ShadowReport(
        shadow=shadow,
        deviations=deviations,
        max_deviation=float(deviations.max()),
        predicted_radius=radius,
        regime="contraction",
        defect=defect,
    )


def shadow_expansion(matrix, pseudo_orbit):
    """Shadow under a uniformly expanding linear map.

    The inverse map contracts, so the construction runs backward: match
    the last sample, pull it back through the inverse to the start, and
    replay forward. For a finite pseudo-orbit this truncates the
    backward limit that defines the exact start, and the reported
    radius max_defect / (1 - 1/rate) covers the truncation.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    svals = np.linalg.svd(matrix, compute_uv=False)
    if svals.min() <= 1e-14 * max(1.0, svals.max()):
        raise SingularMap("expanding construction needs an invertible map")
    rate = float(svals.min())
    if rate <= 1.0 + TOL_HYPERBOLIC:
        raise NotExpanding(f"smallest singular value {rate} is not > 1")

    defect = measure_defect(lambda x: matrix @ x, pseudo_orbit)
    num_steps = len(pseudo_orbit) - 1
    start = pseudo_orbit.states[-1].copy()
    for _ in range(num_steps):
        start = np.linalg.solve(matrix, start)
    shadow = generate_orbit(
        lambda x: matrix @ x, start, num_steps, h=pseudo_orbit.h
    )
    deviations = _deviations(shadow.states, pseudo_orbit.states)
    return ShadowReport(
        shadow=shadow,
        deviations=deviations,
        max_deviation=float(deviations.max()),
        predicted_radius=defect.max_defect / (1.0 - 1.0 / rate),
        regime="expansion",
        defect=defect,
    )


def hyperbolic_split(matrix):
    """Stable/unstable eigen-splitting of a symmetric linear map.

    Eigenvalue moduli within TOL_HYPERBOLIC of 1 raise NotHyperbolic
    instead of silently picking a side. Eigenvectors follow the
    first-nonzero-component-positive sign convention, so splittings are
    deterministic.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    asym = float(np.linalg.norm(matrix - matrix.T))
    if asym > 1e-10 * max(1.0, float(np.linalg.norm(matrix))):
        raise NotHyperbolic(
            "orthogonal splitting is only defined for symmetric maps; "
            "use the characteristic-root test for momentum dynamics"
        )
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (matrix + matrix.T))
    for j in range(eigenvectors.shape[1]):
        col = eigenvectors[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0.0:
            eigenvectors[:, j] = -col

    moduli = np.abs(eigenvalues)
    offenders = np.abs(moduli - 1.0) <= TOL_HYPERBOLIC
    if np.any(offenders):
        bad = eigenvalues[offenders][0]
        raise NotHyperbolic(f"eigenvalue {bad} has modulus within {TOL_HYPERBOLIC:g} of 1")

    stable = moduli < 1.0
    unstable = ~stable
    return HyperbolicSplitting(
        stable_basis=eigenvectors[:, stable],
        unstable_basis=eigenvectors[:, unstable],
        stable_rate=float(moduli[stable].max()) if stable.any() else 0.0,
        unstable_rate=float(moduli[unstable].min()) if unstable.any() else np.inf,
        stable_eigenvalues=eigenvalues[stable],
        unstable_eigenvalues=eigenvalues[unstable],
    )


def _quad_grad_bound(quad, states):
    norms = np.linalg.norm((states - quad.center) @ quad.hessian.T, axis=1)
    return ELL_SAFETY * float(norms.max())


def shadow_saddle(quad, h, pseudo_orbit, eps_target):
    """Shadow of descent samples near a clean quadratic saddle.

    Projects onto the stable and unstable eigen-subspaces of the step
    map, runs the contracting construction (same start) on the former,
    the expanding construction (backward-matched start) on the latter,
    and recombines. Each subspace receives half the radius budget,
    which the step-bound check already accounts for. With no unstable
    part this reduces exactly to the contraction construction.
    """
    step_map = np.eye(quad.dim) - h * quad.hessian
    split = hyperbolic_split(step_map)

    ell = _quad_grad_bound(quad, pseudo_orbit.states)
    smooth = quad.smoothness
    branches = [1.0 / smooth]
    mu = quad.min_positive
    gamma = quad.min_negative_magnitude
    if mu is not None:
        branches.append(mu * eps_target / (smooth * ell))
    if gamma is not None:
        branches.append(gamma * eps_target / (2.0 * smooth * ell))
    allowed = min(branches)
    if h > allowed * (1.0 + _REL_SLACK):
        raise StepTooLarge(
            f"step {h:.6g} exceeds {allowed:.6g} required for radius {eps_target:.6g}"
        )

    centered = pseudo_orbit.states - quad.center
    num_steps = len(pseudo_orbit) - 1
    ks = np.arange(num_steps + 1)

    stable_coords = centered @ split.stable_basis
    stable_shadow = split.stable_eigenvalues[None, :] ** ks[:, None] * stable_coords[0]

    unstable_coords = centered @ split.unstable_basis
    unstable_shadow = (
        split.unstable_eigenvalues[None, :] ** (ks[:, None] - num_steps)
        * unstable_coords[-1]
    )

    states = (
        quad.center
        + stable_shadow @ split.stable_basis.T
        + unstable_shadow @ split.unstable_basis.T
    )
    shadow = Orbit(states=states, h=pseudo_orbit.h, kind="algorithm")
    defect = measure_defect(lambda x: quad.center + step_map @ (x - quad.center), pseudo_orbit)
    deviations = _deviations(states, pseudo_orbit.states)
    return ShadowReport(
        shadow=shadow,
        deviations=deviations,
        max_deviation=float(deviations.max()),
        predicted_radius=eps_target,
        regime="hyperbolic",
        defect=defect,
    )


def shadow_perturbed(
    quad,
    pert,
    h,
    pseudo_orbit,
    eps_target,
    start_anchor=None,
    end_anchor=None,
    tol=FIXED_POINT_TOL,
    max_iters=FIXED_POINT_MAX_ITERS,
):
    """Shadow of descent samples on a perturbed quadratic saddle.

    The orbit is the fixed point of an operator on sequence space that
    propagates gradient steps of the perturbed objective forward along
    the stable eigendirections (anchored at the start) and backward
    along the unstable ones (anchored at the end), via the discrete
    variation-of-constants formula. The operator contracts at rate
    2 h pert / (1 - rho) with rho = 1 - min(mu, gamma/2) h, and its
    fixed point is a genuine descent orbit of quadratic + perturbation:
    the final residual is verified against FIXED_POINT_RESIDUAL_TOL.

    ``start_anchor`` / ``end_anchor`` pin the stable part of the first
    point and the unstable part of the last one; they default to the
    pseudo-orbit's own endpoints and may jointly spend at most half the
    radius budget.
    """
    eigvals = quad.eigenvalues
    if np.any(np.abs(eigvals) <= TOL_HYPERBOLIC):
        raise NotHyperbolic("quadratic part has (near-)zero curvature directions")
    lphi = pert.smoothness
    stable_idx = eigvals > 0.0
    unstable_idx = ~stable_idx

    mu = quad.min_positive
    gamma = quad.min_negative_magnitude
    floors = []
    if mu is not None:
        floors.append(mu)
    if gamma is not None:
        floors.append(0.5 * gamma)
    floor = min(floors)
    if 2.0 * lphi >= floor:
        raise PerturbationTooLarge(
            f"2*pert = {2.0 * lphi:.6g} is not below min(mu, gamma/2) = {floor:.6g}"
        )

    smooth = quad.smoothness + lphi

    def grad_total(x):
        return quad.hessian @ (x - quad.center) + pert.grad(x)

    norms = [float(np.linalg.norm(grad_total(x))) for x in pseudo_orbit.states]
    ell = ELL_SAFETY * max(norms)
    allowed = min(
        1.0 / smooth,
        eps_target * (floor - 4.0 * lphi) / (2.0 * ell * smooth),
    )
    if h > allowed * (1.0 + _REL_SLACK):
        raise StepTooLarge(
            f"step {h:.6g} exceeds {allowed:.6g} required for radius {eps_target:.6g}"
        )

    states = pseudo_orbit.states
    num_steps = states.shape[0] - 1
    vecs = quad.eigenvectors
    start_anchor = states[0] if start_anchor is None else np.asarray(start_anchor, float)
    end_anchor = states[-1] if end_anchor is None else np.asarray(end_anchor, float)
    sigma0 = vecs.T @ (start_anchor - quad.center)
    upsK = vecs.T @ (end_anchor - quad.center)
    budget = float(
        np.linalg.norm((sigma0 - vecs.T @ (states[0] - quad.center))[stable_idx])
        + np.linalg.norm((upsK - vecs.T @ (states[-1] - quad.center))[unstable_idx])
    )
    if budget > 0.5 * eps_target * (1.0 + _REL_SLACK):
        raise BoundaryTooFar(
            f"anchor offsets spend {budget:.6g} of the {0.5 * eps_target:.6g} budget"
        )

    step_stable = 1.0 - h * eigvals[stable_idx]
    step_unstable = 1.0 - h * eigvals[unstable_idx]

    current = states.copy()
    changes = []
    grew = 0
    converged = False
    iterations = 0
    while iterations < max_iters:
        iterations += 1
        pert_grads = np.empty_like(current)
        for k in range(num_steps + 1):
            pert_grads[k] = pert.grad(current[k])
        gcoords = pert_grads @ vecs

        coords = np.empty_like(gcoords)
        stable_part = np.empty((num_steps + 1, int(stable_idx.sum())))
        stable_part[0] = sigma0[stable_idx]
        gs = gcoords[:, stable_idx]
        for k in range(num_steps):
            stable_part[k + 1] = step_stable * stable_part[k] - h * gs[k]

        unstable_part = np.empty((num_steps + 1, int(unstable_idx.sum())))
        unstable_part[-1] = upsK[unstable_idx]
        gu = gcoords[:, unstable_idx]
        for k in range(num_steps - 1, -1, -1):
            unstable_part[k] = (unstable_part[k + 1] + h * gu[k]) / step_unstable

        coords[:, stable_idx] = stable_part
        coords[:, unstable_idx] = unstable_part
        updated = quad.center + coords @ vecs.T

        change = float(np.linalg.norm(updated - current, axis=1).max())
        changes.append(change)
        current = updated
        if change <= tol:
            converged = True
            break
        if len(changes) >= 2 and change > changes[-2]:
            grew += 1
            if grew >= _DIVERGENCE_PATIENCE:
                raise FixedPointNotConverged(
                    f"sup-norm change grew for {grew} consecutive iterations",
                    history=changes,
                )
        else:
            grew = 0
    if not converged:
        raise FixedPointNotConverged(
            f"no convergence within {max_iters} iterations (last change {changes[-1]:.3e})",
            history=changes,
        )

    residual = 0.0
    for k in range(num_steps):
        step = current[k] - h * grad_total(current[k])
        residual = max(residual, float(np.linalg.norm(current[k + 1] - step)))
    if residual > FIXED_POINT_RESIDUAL_TOL:
        raise FixedPointNotConverged(
            f"fixed point violates the descent recursion by {residual:.3e}",
            history=changes,
        )

    shadow = Orbit(states=current, h=pseudo_orbit.h, kind="algorithm")
    deviations = _deviations(current, states)
    return ShadowReport(
        shadow=shadow,
        deviations=deviations,
        max_deviation=float(deviations.max()),
        predicted_radius=eps_target,
        regime="perturbed",
        iterations_used=iterations,
        fp_change_history=tuple(changes),
    )


def shadow_sgd(obj, h, flow_orbit, noise_sequence, noise_bound, eps_target):
    """Noisy-gradient orbit from the same start, tracking descent samples.

    Each step adds a supplied noise vector of norm at most
    ``noise_bound`` to the gradient. Tracking within ``eps_target`` is
    guaranteed when mu * eps exceeds the noise bound and the step obeys
    the noisy step bound; both are checked.
    """
    mu = obj.strong_convexity
    if mu is None or mu <= 0.0:
        raise NotStronglyConvex("noisy shadowing needs a strongly convex objective")
    ell = estimate_grad_bound(obj, flow_orbit)
    smooth = obj.smoothness
    if mu * eps_target <= noise_bound:
        raise NoiseDominates(
            f"noise bound {noise_bound:.6g} >= mu * eps = {mu * eps_target:.6g}"
        )
    allowed = min(
        2.0 * (mu * eps_target - noise_bound) / (ell * smooth),
        1.0 / smooth,
    )
    if h > allowed * (1.0 + _REL_SLACK):
        raise StepTooLarge(
            f"step {h:.6g} exceeds {allowed:.6g} required for radius {eps_target:.6g}"
        )

    states = flow_orbit.states
    num_steps = states.shape[0] - 1
    noise_sequence = np.atleast_2d(np.asarray(noise_sequence, dtype=float))
    if noise_sequence.shape[0] < num_steps:
        raise ValueError("noise sequence shorter than the orbit")

    shadow_states = np.empty_like(states)
    shadow_states[0] = states[0]
    x = states[0]
    for k in range(num_steps):
        x = sgd_step(obj, h, x, noise_sequence[k], noise_bound)
        shadow_states[k + 1] = x
    shadow = Orbit(states=shadow_states, h=flow_orbit.h, kind="algorithm")
    defect = measure_defect(gd_map(obj, h), flow_orbit)
    deviations = _deviations(shadow_states, states)
    return ShadowReport(
        shadow=shadow,
        deviations=deviations,
        max_deviation=float(deviations.max()),
        predicted_radius=eps_target,
        regime="sgd",
        defect=defect,
    )


# --- heavy-ball hyperbolicity ---------------------------------------------


def hb_hyperbolicity_check(quad, h, alpha):
    """Unit-circle test for the heavy-ball phase map on a quadratic.

    For each curvature mode lam the phase map contributes the roots of
    q^2 - (beta + 1 - h^2 lam) q + beta = 0 with beta = 1 - h alpha.
    The map is hyperbolic iff every root modulus stays clear of 1 by
    more than TOL_HYPERBOLIC. A zero curvature mode always produces the
    root 1 (the polynomial factors as (q - 1)(q - beta)).
    """
    beta = 1.0 - h * alpha
    if not 0.0 <= beta < 1.0:
        raise BadMomentum(f"momentum 1 - h*alpha = {beta} outside [0, 1)")
    modes = []
    hyperbolic = True
    for lam in quad.eigenvalues:
        b = beta + 1.0 - h * h * lam
        disc = complex(b * b - 4.0 * beta)
        root = np.sqrt(disc)
        q1 = 0.5 * (b + root)
        q2 = 0.5 * (b - root)
        m1, m2 = abs(q1), abs(q2)
        if abs(m1 - 1.0) <= TOL_HYPERBOLIC or abs(m2 - 1.0) <= TOL_HYPERBOLIC:
            hyperbolic = False
        modes.append(ModeRoots(curvature=float(lam), roots=(q1, q2), moduli=(m1, m2)))
    return HBHyperbolicity(hyperbolic=hyperbolic, modes=tuple(modes))


def hb_phase_matrix(quad, h, alpha):
    """Companion matrix of the heavy-ball step on centered (position, velocity)."""
    beta = 1.0 - h * alpha
    if not 0.0 <= beta < 1.0:
        raise BadMomentum(f"momentum 1 - h*alpha = {beta} outside [0, 1)")
    d = quad.dim
    eye = np.eye(d)
    top = np.hstack([eye - h * h * quad.hessian, beta * h * eye])
    bottom = np.hstack([-h * quad.hessian, beta * eye])
    return np.vstack([top, bottom])
