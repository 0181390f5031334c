"""Experiment presets, configuration handling and report emission.

Each preset wires landscape -> dynamics -> shadowing for one reference
experiment at desk scale, measures deviations and defects against the
regime bounds, and serializes the result as CSV (plus a summary table
and a rendered figure). Independent presets and sweep points share no
mutable state and may run concurrently.
"""

import os
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import plots
from .dynamics import (
    PhasePoint,
    choose_substeps,
    gd_map,
    gd_vector_field,
    generate_orbit,
    hb_map,
    hb_step,
    hb_vector_field,
    rk4_map,
    sample_flow_quadratic_gd,
    sample_flow_quadratic_hb,
)
from .errors import ConfigError, IoError
from .landscape import generate_synthetic, load_dataset_csv, make_hosaki, make_quadratic, make_sigmoid_erm
from .shadowing import (
    bound_defect_gd,
    bound_defect_hb,
    bound_radius_sc,
    estimate_grad_bound,
    measure_defect,
    shadow_saddle,
)

PRESETS = ("sc_quadratic", "saddle", "hosaki", "hb_quadratic", "sigmoid_erm", "h_sweep")

CSV_HEADER = "k,deviation,defect,delta_bound,eps_bound,loss"

_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


@dataclass
class ExperimentConfig:
    """Knobs of one experiment run; file keys match the field names."""

    preset: str
    h: float = 0.2
    steps: int = 100
    alpha: Optional[float] = None
    lambda_reg: float = 0.005
    seed: int = 0
    initial_point: object = None  # vector, "random", or None for the preset default
    dataset_path: Optional[str] = None
    output_dir: str = "out"
    h_grid: tuple = ()
    naive_start: bool = False
    shadow_horizon: int = 7
    algorithm: str = "gd"
    n_samples: int = 1000
    n_features: int = 20
    init_scale: float = 0.01
    plot: bool = True
    sweep_target: str = "sigmoid_erm"


@dataclass(frozen=True)
class ExperimentReport:
    """Per-iteration rows plus the bound/observed summary of one run."""

    preset: str
    h: float
    reference: object
    algorithm: object
    deviations: np.ndarray
    defects: np.ndarray  # aligned with rows; the final row has no defect (nan)
    losses: np.ndarray
    delta_bound: float
    eps_bound: float
    regime: str
    notes: dict = field(default_factory=dict)

    @property
    def steps(self):
        return self.deviations.size - 1

    @property
    def max_deviation(self):
        return float(np.max(self.deviations))

    @property
    def delta_obs(self):
        finite = self.defects[np.isfinite(self.defects)]
        return float(finite.max()) if finite.size else float("nan")


@dataclass(frozen=True)
class SweepReport:
    """One summary row per step size plus the fitted log-log slope."""

    target: str
    h_values: np.ndarray
    max_deviations: np.ndarray
    delta_obs: np.ndarray
    delta_bounds: np.ndarray
    eps_bounds: np.ndarray
    steps: np.ndarray
    slope: float
    runs: tuple


# --- configuration ----------------------------------------------------------


_DEFAULTS = {
    "sc_quadratic": dict(h=0.2, steps=100),
    "saddle": dict(h=0.2, steps=7),
    "hosaki": dict(h=0.3, steps=60),
    "hb_quadratic": dict(h=0.2, steps=100, alpha=1.0),
    "sigmoid_erm": dict(h=1.0, steps=60, alpha=0.3),
    "h_sweep": dict(h=1.0, steps=60, h_grid=(0.125, 0.25, 0.5, 1.0), alpha=0.3),
}


def default_config(preset):
    if preset not in PRESETS:
        raise ConfigError("preset", f"unknown preset {preset!r}; choose from {PRESETS}")
    return ExperimentConfig(preset=preset, **_DEFAULTS[preset])


def parse_config_file(path):
    """Flat key=value file, one key per line, '#' starts a comment."""
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IoError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("file", f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _parse_bool(field_name, text):
    try:
        return _BOOL_WORDS[str(text).strip().lower()]
    except KeyError:
        raise ConfigError(field_name, f"expected a boolean, got {text!r}") from None


def _parse_float(field_name, text):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ConfigError(field_name, f"expected a number, got {text!r}") from None


def _parse_int(field_name, text):
    try:
        return int(str(text).strip())
    except (TypeError, ValueError):
        raise ConfigError(field_name, f"expected an integer, got {text!r}") from None


def _parse_floats(field_name, text):
    if isinstance(text, (tuple, list, np.ndarray)):
        return tuple(float(v) for v in text)
    parts = [p for p in str(text).replace(";", ",").split(",") if p.strip()]
    return tuple(_parse_float(field_name, p) for p in parts)


_PARSERS = {
    "preset": lambda v: str(v).strip(),
    "h": lambda v: _parse_float("h", v),
    "k": lambda v: _parse_int("k", v),
    "steps": lambda v: _parse_int("k", v),
    "alpha": lambda v: _parse_float("alpha", v),
    "lambda_reg": lambda v: _parse_float("lambda_reg", v),
    "seed": lambda v: _parse_int("seed", v),
    "initial_point": lambda v: v if v == "random" else np.asarray(_parse_floats("initial_point", v)),
    "dataset_path": lambda v: str(v).strip(),
    "output_dir": lambda v: str(v).strip(),
    "h_grid": lambda v: _parse_floats("h_grid", v),
    "naive_start": lambda v: _parse_bool("naive_start", v),
    "shadow_horizon": lambda v: _parse_int("shadow_horizon", v),
    "algorithm": lambda v: str(v).strip().lower(),
    "n_samples": lambda v: _parse_int("n_samples", v),
    "n_features": lambda v: _parse_int("n_features", v),
    "init_scale": lambda v: _parse_float("init_scale", v),
    "plot": lambda v: _parse_bool("plot", v),
    "sweep_target": lambda v: str(v).strip(),
}

_FIELD_FOR_KEY = {"k": "steps"}


def build_config(preset=None, file_values=None, overrides=None):
    """Merge preset defaults <- config file <- explicit overrides."""
    merged = {}
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in _PARSERS:
                raise ConfigError(key, "unknown configuration key")
            merged[_FIELD_FOR_KEY.get(key, key)] = _PARSERS[key](value)
    preset = merged.pop("preset", preset)
    if preset is None:
        raise ConfigError("preset", "no preset given on the command line or in the file")
    config = replace(default_config(preset), **merged)
    _validate_config(config)
    return config


def _validate_config(config):
    if config.h <= 0.0:
        raise ConfigError("h", "step must be positive")
    if config.steps < 1:
        raise ConfigError("k", "iteration count must be >= 1")
    if config.algorithm not in ("gd", "hb"):
        raise ConfigError("algorithm", f"expected gd or hb, got {config.algorithm!r}")
    if config.preset in ("hb_quadratic",) and (config.alpha is None or config.alpha <= 0.0):
        raise ConfigError("alpha", "heavy-ball presets need a positive viscosity")
    if config.preset == "sigmoid_erm" and config.algorithm == "hb" and (
        config.alpha is None or config.alpha <= 0.0
    ):
        raise ConfigError("alpha", "heavy-ball runs need a positive viscosity")
    if config.preset == "h_sweep":
        grid = config.h_grid
        if len(grid) < 3:
            raise ConfigError("h_grid", "need at least 3 step sizes")
        if any(h <= 0.0 for h in grid):
            raise ConfigError("h_grid", "step sizes must be positive")
        if max(grid) / min(grid) < 4.0:
            raise ConfigError("h_grid", "grid must span at least a 4x range")
        if config.sweep_target not in ("sigmoid_erm", "sc_quadratic"):
            raise ConfigError("sweep_target", f"cannot sweep preset {config.sweep_target!r}")
    if config.shadow_horizon < 1:
        raise ConfigError("shadow_horizon", "must be >= 1")
    if config.init_scale <= 0.0:
        raise ConfigError("init_scale", "must be positive")


def _initial_vector(config, dim, default):
    point = config.initial_point
    if point is None:
        return np.asarray(default, dtype=float)
    if isinstance(point, str):
        if point != "random":
            raise ConfigError("initial_point", f"expected a vector or 'random', got {point!r}")
        rng = np.random.default_rng([config.seed, 1])
        return config.init_scale * rng.standard_normal(dim)
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if point.size != dim:
        raise ConfigError("initial_point", f"expected {dim} coordinates, got {point.size}")
    return point


# --- presets ----------------------------------------------------------------

_SC_HESSIAN = np.array([[2.0, 1.0], [1.0, 2.0]])
_SADDLE_HESSIAN = np.diag([-1.0, 1.0])
_HOSAKI_START = np.array([2.02, 2.0])


def _run_sc_quadratic(config):
    obj, quad = make_quadratic(_SC_HESSIAN, np.zeros(2))
    y0 = _initial_vector(config, 2, np.array([1.0, 1.0]))
    reference = sample_flow_quadratic_gd(quad, config.h, config.steps, y0)
    stepper = gd_map(obj, config.h)
    algorithm = generate_orbit(stepper, y0, config.steps, h=config.h)
    ell = estimate_grad_bound(obj, reference)
    defect = measure_defect(stepper, reference)
    return _assemble(
        config,
        reference,
        algorithm,
        obj,
        defect,
        delta_bound=bound_defect_gd(ell, obj.smoothness, config.h),
        eps_bound=bound_radius_sc(config.h, ell, obj.smoothness, obj.strong_convexity),
        regime="contraction",
    )


def _run_saddle(config):
    obj, quad = make_quadratic(_SADDLE_HESSIAN, np.zeros(2))
    y0 = _initial_vector(config, 2, np.array([1.0, 1.0]))
    reference = sample_flow_quadratic_gd(quad, config.h, config.steps, y0)
    stepper = gd_map(obj, config.h)
    defect = measure_defect(stepper, reference)
    smooth = obj.smoothness
    mu = quad.min_positive
    gamma = quad.min_negative_magnitude

    def radius(horizon):
        ell = estimate_grad_bound(obj, sample_flow_quadratic_gd(quad, config.h, horizon, y0))
        return max(config.h * smooth * ell / mu, 2.0 * config.h * smooth * ell / gamma)

    if config.naive_start:
        # The published radius is the one the properly started shadow
        # would enjoy at the design horizon; the naive run demonstrates
        # how far past it the same-start orbit drifts.
        eps = radius(min(config.shadow_horizon, config.steps))
        algorithm = generate_orbit(stepper, y0, config.steps, h=config.h)
        notes = {"naive_start": True, "design_horizon": min(config.shadow_horizon, config.steps)}
    else:
        eps = radius(config.steps)
        shadow = shadow_saddle(quad, config.h, reference, eps)
        algorithm = shadow.shadow
        notes = {"naive_start": False}
    return _assemble(
        config,
        reference,
        algorithm,
        obj,
        defect,
        delta_bound=bound_defect_gd(estimate_grad_bound(obj, reference), smooth, config.h),
        eps_bound=eps,
        regime="hyperbolic",
        notes=notes,
    )


def _run_hosaki(config):
    obj = make_hosaki()
    y0 = _initial_vector(config, 2, _HOSAKI_START)
    field_fn = gd_vector_field(obj)
    provisional = bound_defect_gd(
        max(1e-12, 1.1 * float(np.linalg.norm(obj.grad(y0)))), obj.smoothness, config.h
    )
    substeps = choose_substeps(field_fn, config.h, y0, provisional)
    reference = generate_orbit(
        rk4_map(field_fn, config.h, substeps), y0, config.steps, h=config.h, kind="sampled_flow"
    )
    stepper = gd_map(obj, config.h)
    algorithm = generate_orbit(stepper, y0, config.steps, h=config.h)
    ell = estimate_grad_bound(obj, reference)
    defect = measure_defect(stepper, reference)
    return _assemble(
        config,
        reference,
        algorithm,
        obj,
        defect,
        delta_bound=bound_defect_gd(ell, obj.smoothness, config.h),
        eps_bound=float("nan"),
        regime="empirical",
        notes={"substeps": substeps},
    )


def _run_hb_quadratic(config):
    obj, quad = make_quadratic(_SC_HESSIAN, np.zeros(2))
    q0 = _initial_vector(config, 2, np.array([1.0, 1.0]))
    start = PhasePoint(position=q0, velocity=np.zeros(2))
    reference = sample_flow_quadratic_hb(quad, config.alpha, config.h, config.steps, start)
    algorithm = generate_orbit(
        lambda s: hb_step(obj, config.alpha, config.h, s), start, config.steps, h=config.h
    )
    ell = estimate_grad_bound(obj, reference)
    defect = measure_defect(hb_map(obj, config.alpha, config.h), reference)
    return _assemble(
        config,
        reference,
        algorithm,
        obj,
        defect,
        delta_bound=bound_defect_hb(ell, obj.smoothness, config.alpha, config.h),
        eps_bound=float("nan"),
        regime="hb_empirical",
        notes={"euclidean_norm_caveat": True},
    )


def _erm_objective(config):
    if config.dataset_path:
        data = load_dataset_csv(config.dataset_path)
    else:
        data = generate_synthetic(config.n_samples, config.n_features, config.seed)
    return make_sigmoid_erm(data, config.lambda_reg), data


def _run_sigmoid_erm(config):
    obj, _ = _erm_objective(config)
    x0 = config.initial_point
    if x0 is None:
        x0 = "random"
    x0 = _initial_vector(replace(config, initial_point=x0), obj.dim, None)
    ell0 = max(1e-12, 1.1 * float(np.linalg.norm(obj.grad(x0))))

    if config.algorithm == "hb":
        field_fn = hb_vector_field(obj, config.alpha)
        provisional = bound_defect_hb(ell0, obj.smoothness, config.alpha, config.h)
        start_row = np.concatenate([x0, np.zeros(obj.dim)])
        substeps = choose_substeps(field_fn, config.h, start_row, provisional)
        reference = generate_orbit(
            rk4_map(field_fn, config.h, substeps),
            start_row,
            config.steps,
            h=config.h,
            kind="sampled_flow",
        )
        reference = _as_phase(reference, obj.dim)
        algorithm = generate_orbit(
            lambda s: hb_step(obj, config.alpha, config.h, s),
            PhasePoint(position=x0, velocity=np.zeros(obj.dim)),
            config.steps,
            h=config.h,
        )
        ell = estimate_grad_bound(obj, reference)
        defect = measure_defect(hb_map(obj, config.alpha, config.h), reference)
        delta_bound = bound_defect_hb(ell, obj.smoothness, config.alpha, config.h)
        regime = "hb_empirical"
        eps = float("nan")
        notes = {"euclidean_norm_caveat": True, "substeps": substeps}
    else:
        field_fn = gd_vector_field(obj)
        provisional = bound_defect_gd(ell0, obj.smoothness, config.h)
        substeps = choose_substeps(field_fn, config.h, x0, provisional)
        reference = generate_orbit(
            rk4_map(field_fn, config.h, substeps),
            x0,
            config.steps,
            h=config.h,
            kind="sampled_flow",
        )
        stepper = gd_map(obj, config.h)
        algorithm = generate_orbit(stepper, x0, config.steps, h=config.h)
        ell = estimate_grad_bound(obj, reference)
        defect = measure_defect(stepper, reference)
        delta_bound = bound_defect_gd(ell, obj.smoothness, config.h)
        mu = obj.strong_convexity
        if mu is not None and config.h <= 1.0 / obj.smoothness:
            eps = bound_radius_sc(config.h, ell, obj.smoothness, mu)
            regime = "contraction"
        else:
            eps = float("nan")
            regime = "empirical"
        notes = {"substeps": substeps}
    return _assemble(
        config,
        reference,
        algorithm,
        obj,
        defect,
        delta_bound=delta_bound,
        eps_bound=eps,
        regime=regime,
        notes=notes,
    )


def _as_phase(orbit, dim):
    # generate_orbit on stacked rows does not know the position width
    return type(orbit)(
        states=np.array(orbit.states), h=orbit.h, kind=orbit.kind, phase_dim=dim
    )


_RUNNERS = {
    "sc_quadratic": _run_sc_quadratic,
    "saddle": _run_saddle,
    "hosaki": _run_hosaki,
    "hb_quadratic": _run_hb_quadratic,
    "sigmoid_erm": _run_sigmoid_erm,
}


def _assemble(config, reference, algorithm, obj, defect, delta_bound, eps_bound, regime, notes=None):
    deviations = np.linalg.norm(algorithm.states - reference.states, axis=1)
    defects = np.append(defect.per_step_defects, np.nan)
    losses = np.array([obj.value(pos) for pos in algorithm.positions])
    return ExperimentReport(
        preset=config.preset,
        h=config.h,
        reference=reference,
        algorithm=algorithm,
        deviations=deviations,
        defects=defects,
        losses=losses,
        delta_bound=delta_bound,
        eps_bound=eps_bound,
        regime=regime,
        notes=dict(notes or {}),
    )


def run_preset(config):
    """Run one preset, write its artifacts, and return the report."""
    if config.preset == "h_sweep":
        return run_h_sweep(config)
    if config.preset not in _RUNNERS:
        raise ConfigError("preset", f"unknown preset {config.preset!r}")
    report = _RUNNERS[config.preset](config)
    write_outputs(report, config.output_dir, plot=config.plot)
    return report


def run_h_sweep(config):
    """Rerun the target preset across h_grid at a fixed time horizon.

    The horizon is steps * max(h_grid) seconds, so every grid point
    covers the same stretch of the reference trajectory. Returns the
    per-h maxima and the least-squares slope of log(max deviation)
    against log(h).
    """
    _validate_config(replace(config, preset="h_sweep"))
    grid = tuple(sorted(config.h_grid))
    horizon = config.steps * max(grid)
    runs = []
    for h in grid:
        sub = replace(
            config,
            preset=config.sweep_target,
            h=h,
            steps=max(1, int(round(horizon / h))),
            h_grid=(),
            plot=False,
        )
        runs.append(_RUNNERS[config.sweep_target](sub))
    max_devs = np.array([r.max_deviation for r in runs])
    slope = float(np.polyfit(np.log(np.array(grid)), np.log(max_devs), 1)[0])
    sweep = SweepReport(
        target=config.sweep_target,
        h_values=np.array(grid),
        max_deviations=max_devs,
        delta_obs=np.array([r.delta_obs for r in runs]),
        delta_bounds=np.array([r.delta_bound for r in runs]),
        eps_bounds=np.array([r.eps_bound for r in runs]),
        steps=np.array([r.steps for r in runs]),
        slope=slope,
        runs=tuple(runs),
    )
    write_sweep_outputs(sweep, config.output_dir, plot=config.plot)
    return sweep


# --- emission ----------------------------------------------------------------


def _fmt(value):
    return "%.17g" % value


def emit_csv(report, path):
    """Write the per-iteration table; floats carry 17 significant digits."""
    lines = [CSV_HEADER]
    for k in range(report.deviations.size):
        lines.append(
            ",".join(
                [
                    str(k),
                    _fmt(report.deviations[k]),
                    _fmt(report.defects[k]),
                    _fmt(report.delta_bound),
                    _fmt(report.eps_bound),
                    _fmt(report.losses[k]),
                ]
            )
        )
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_csv(path):
    """Parse a file written by emit_csv back into column arrays."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line.strip() for line in fh if line.strip()]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not lines or lines[0] != CSV_HEADER:
        raise IoError(f"{path} does not carry the expected header")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return {name: data[:, i] for i, name in enumerate(CSV_HEADER.split(","))}


def summary_lines(report):
    lines = [
        f"preset: {report.preset}",
        f"regime: {report.regime}",
        f"h: {_fmt(report.h)}",
        f"rows: {report.deviations.size}",
        "",
        "quantity        observed                predicted",
        f"deviation       {_fmt(report.max_deviation):<22}  {_fmt(report.eps_bound)}",
        f"defect          {_fmt(report.delta_obs):<22}  {_fmt(report.delta_bound)}",
    ]
    for key, value in sorted(report.notes.items()):
        lines.append(f"note {key}: {value}")
    if report.notes.get("euclidean_norm_caveat"):
        lines.append(
            "note: deviations use the Euclidean norm; momentum guarantees hold in an adapted norm"
        )
    return lines


def write_outputs(report, out_dir, plot=True):
    os.makedirs(out_dir, exist_ok=True)
    emit_csv(report, os.path.join(out_dir, f"{report.preset}.csv"))
    try:
        with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(summary_lines(report)) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write summary: {exc}") from exc
    if plot:
        plots.render_report_figure(report, os.path.join(out_dir, f"{report.preset}.png"))


def write_sweep_outputs(sweep, out_dir, plot=True):
    os.makedirs(out_dir, exist_ok=True)
    lines = ["h,max_deviation,delta_obs,delta_bound,eps_bound,k"]
    for i in range(sweep.h_values.size):
        lines.append(
            ",".join(
                [
                    _fmt(sweep.h_values[i]),
                    _fmt(sweep.max_deviations[i]),
                    _fmt(sweep.delta_obs[i]),
                    _fmt(sweep.delta_bounds[i]),
                    _fmt(sweep.eps_bounds[i]),
                    str(int(sweep.steps[i])),
                ]
            )
        )
    path = os.path.join(out_dir, "h_sweep.csv")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
            fh.write(
                "\n".join(
                    [
                        f"sweep target: {sweep.target}",
                        f"fitted log-log slope: {_fmt(sweep.slope)}",
                        f"h values: {', '.join(_fmt(v) for v in sweep.h_values)}",
                        f"max deviations: {', '.join(_fmt(v) for v in sweep.max_deviations)}",
                    ]
                )
                + "\n"
            )
    except OSError as exc:
        raise IoError(f"cannot write sweep outputs: {exc}") from exc
    for i, run in enumerate(sweep.runs):
        emit_csv(run, os.path.join(out_dir, f"{sweep.target}_h{sweep.h_values[i]:g}.csv"))
    if plot:
        plots.render_sweep_figure(sweep, os.path.join(out_dir, "h_sweep.png"))
