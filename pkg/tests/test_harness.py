import numpy as np
import pytest

from shadowopt.errors import ConfigError
from shadowopt.harness import (
    CSV_HEADER,
    build_config,
    default_config,
    parse_config_file,
    read_csv,
    run_h_sweep,
    run_preset,
)


def _run(preset, tmp_path, **overrides):
    overrides = {"output_dir": str(tmp_path), "plot": "false", **overrides}
    return run_preset(build_config(preset, overrides=overrides))


# --- configuration -----------------------------------------------------------


def test_config_file_parsing(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# comment line\n"
        "preset = saddle\n"
        "h = 0.1\n"
        "k = 12  # trailing comment\n"
        "naive_start = true\n"
        "initial_point = 1.5, 0.5\n"
    )
    config = build_config(file_values=parse_config_file(path))
    assert config.preset == "saddle"
    assert config.h == 0.1
    assert config.steps == 12
    assert config.naive_start is True
    assert np.array_equal(config.initial_point, [1.5, 0.5])


def test_cli_overrides_beat_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("preset = sc_quadratic\nh = 0.1\n")
    config = build_config(file_values=parse_config_file(path), overrides={"h": "0.25"})
    assert config.h == 0.25


def test_config_rejects_unknown_key():
    with pytest.raises(ConfigError) as err:
        build_config("sc_quadratic", overrides={"step_size": "0.1"})
    assert err.value.field == "step_size"


def test_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        build_config("sc_quadratic", overrides={"h": "fast"})
    with pytest.raises(ConfigError):
        build_config("sc_quadratic", overrides={"h": "-0.2"})
    with pytest.raises(ConfigError):
        build_config("sc_quadratic", overrides={"k": "0"})
    with pytest.raises(ConfigError):
        build_config("unknown_preset")


def test_sweep_grid_preconditions():
    with pytest.raises(ConfigError):
        build_config("h_sweep", overrides={"h_grid": "0.5"})
    with pytest.raises(ConfigError):
        build_config("h_sweep", overrides={"h_grid": "0.4,0.5,0.6"})  # < 4x span


# --- presets ------------------------------------------------------------------


def test_sc_quadratic_deviation_bounded_and_decaying(tmp_path):
    report = _run("sc_quadratic", tmp_path)
    assert np.all(report.deviations <= report.eps_bound)
    assert report.deviations[-1] <= 0.05 * report.max_deviation
    finite = report.defects[np.isfinite(report.defects)]
    assert np.all(finite <= report.delta_bound)


def test_saddle_preset_shadow_versus_naive(tmp_path):
    shadow = _run("saddle", tmp_path / "shadow")
    assert np.all(shadow.deviations <= shadow.eps_bound)
    naive = _run("saddle", tmp_path / "naive", naive_start="true", k="30")
    crossed = np.nonzero(naive.deviations > 10.0 * naive.eps_bound)[0]
    assert crossed.size and crossed[0] < 30


def test_hosaki_preset_runs_and_respects_defect_bound(tmp_path):
    report = _run("hosaki", tmp_path)
    finite = report.defects[np.isfinite(report.defects)]
    assert np.all(finite <= report.delta_bound)
    assert np.isnan(report.eps_bound)
    # both the algorithm and the sampled flow settle in the same basin
    assert report.deviations[-1] <= 1e-3


def test_hb_quadratic_preset_defects(tmp_path):
    report = _run("hb_quadratic", tmp_path)
    finite = report.defects[np.isfinite(report.defects)]
    assert np.all(finite <= report.delta_bound)
    assert report.deviations[-1] <= 0.05 * report.max_deviation
    assert report.notes.get("euclidean_norm_caveat") is True


def test_sigmoid_erm_losses_strictly_decrease(tmp_path):
    report = _run("sigmoid_erm", tmp_path)
    diffs = np.diff(report.losses)
    assert np.all(diffs < 0.0)
    finite = report.defects[np.isfinite(report.defects)]
    assert np.all(finite <= report.delta_bound)


def test_sigmoid_erm_heavy_regularization_contracts(tmp_path):
    report = _run("sigmoid_erm", tmp_path, lambda_reg="0.5")
    assert report.regime == "contraction"
    assert np.all(report.deviations <= report.eps_bound)
    assert report.deviations[-1] <= 1e-6 * max(report.max_deviation, 1e-30)
    # strictly decreasing until the loss hits float resolution, then
    # parked at the float fixed point up to ulp-level jitter
    gaps = report.losses - report.losses.min()
    resolvable = gaps[:-1] > 1e-12 * (1.0 + np.abs(report.losses[:-1]))
    assert np.all(np.diff(report.losses)[resolvable] < 0.0)
    ulp = 4.0 * np.finfo(float).eps * np.abs(report.losses[:-1])
    assert np.all(np.diff(report.losses) <= ulp)


def test_every_preset_keeps_defects_below_bound(tmp_path):
    for preset in ("sc_quadratic", "saddle", "hosaki", "hb_quadratic", "sigmoid_erm"):
        report = _run(preset, tmp_path / preset)
        finite = report.defects[np.isfinite(report.defects)]
        assert np.all(finite <= report.delta_bound), preset


# --- emission ------------------------------------------------------------------


def test_emit_csv_shape_for_single_step(tmp_path):
    report = _run("sc_quadratic", tmp_path, k="1")
    lines = (tmp_path / "sc_quadratic.csv").read_text().strip().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 3  # header + 2 data rows


def test_emit_csv_roundtrip_is_bitwise(tmp_path):
    report = _run("sc_quadratic", tmp_path)
    cols = read_csv(tmp_path / "sc_quadratic.csv")
    assert np.array_equal(cols["deviation"], report.deviations)
    assert np.array_equal(cols["defect"], report.defects, equal_nan=True)
    assert np.array_equal(cols["loss"], report.losses)
    assert np.all(cols["delta_bound"] == report.delta_bound)
    assert np.all(cols["eps_bound"] == report.eps_bound)


def test_emit_csv_deviation_column_within_radius_column(tmp_path):
    _run("sc_quadratic", tmp_path)
    cols = read_csv(tmp_path / "sc_quadratic.csv")
    assert np.all(cols["deviation"] <= cols["eps_bound"])


def test_identical_config_gives_identical_bytes(tmp_path):
    _run("sigmoid_erm", tmp_path / "a", seed="5")
    _run("sigmoid_erm", tmp_path / "b", seed="5")
    a = (tmp_path / "a" / "sigmoid_erm.csv").read_bytes()
    b = (tmp_path / "b" / "sigmoid_erm.csv").read_bytes()
    assert a == b


def test_summary_file_written(tmp_path):
    _run("sc_quadratic", tmp_path)
    text = (tmp_path / "summary.txt").read_text()
    assert "preset: sc_quadratic" in text
    assert "deviation" in text


def test_plot_files_rendered(tmp_path):
    run_preset(build_config("sc_quadratic", overrides={"output_dir": str(tmp_path), "k": "20"}))
    assert (tmp_path / "sc_quadratic.png").exists()


# --- sweeps ---------------------------------------------------------------------


def test_quadratic_sweep_slope_and_ratios(tmp_path):
    config = build_config(
        "h_sweep",
        overrides={
            "output_dir": str(tmp_path),
            "plot": "false",
            "sweep_target": "sc_quadratic",
            "h_grid": "0.01,0.02,0.04,0.08",
            "k": "50",
            "h": "0.08",
        },
    )
    sweep = run_h_sweep(config)
    assert 0.8 <= sweep.slope <= 1.2
    ratios = sweep.max_deviations[1:] / sweep.max_deviations[:-1]
    assert np.all((1.6 <= ratios) & (ratios <= 2.4))
    assert (tmp_path / "h_sweep.csv").exists()
    assert (tmp_path / "sc_quadratic_h0.01.csv").exists()


def test_sweep_through_run_preset(tmp_path):
    config = build_config(
        "h_sweep",
        overrides={
            "output_dir": str(tmp_path),
            "plot": "false",
            "sweep_target": "sc_quadratic",
            "h_grid": "0.02,0.04,0.08",
            "k": "40",
            "h": "0.08",
        },
    )
    sweep = run_preset(config)
    assert sweep.h_values.size == 3


def test_default_configs_are_valid():
    for preset in ("sc_quadratic", "saddle", "hosaki", "hb_quadratic", "sigmoid_erm", "h_sweep"):
        config = default_config(preset)
        assert config.preset == preset
