import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError
from typer.testing import CliRunner

from harness.cli import EXIT_ERROR, EXIT_PASSED, EXIT_VERDICT_FAILED, app
from harness.config import ExperimentConfig, Scenario, load_config
from harness.ensemble import COLUMNS, run_ensemble
from harness.outputs import DIAGNOSTICS_FILE, SUMMARY_FILE, emit_outputs, format_cell
from harness.scenarios import RunResult, richardson_order, run_counterexample, run_simulation
from harness.selector import get_available_scenarios, get_runner, run_scenario
from harness.settings import HarnessSettings
from skdv.dynamics import State
from skdv.errors import InvalidArgumentError
from skdv.spectral_core import ComplexField, Grid1D, RealField

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = {
    "grid": {"length": 16 * math.pi, "points": 128},
    "scheme": {"dt": 0.01, "T0": 0.05},
    "noise": {"phi": {"mass": 0.01}, "psi": {"mass": 0.01}, "basis_size": 33},
    "seed": 3,
    "paths": 2,
}


def small_config(**overrides) -> ExperimentConfig:
    return ExperimentConfig.model_validate({**SMALL, **overrides})


def write_config(tmp_path: Path, data: dict) -> Path:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


######################################################
## Configuration
######################################################


def test_unknown_keys_are_rejected(tmp_path):
    with pytest.raises(ValidationError):
        load_config(write_config(tmp_path, {"scenario": "simulate", "grdi": {}}))
    with pytest.raises(ValidationError):
        load_config(write_config(tmp_path, {"noise": {"phi": {"preset": "gaussian", "sigma": 1}}}))


def test_config_consistency_checks():
    with pytest.raises(ValidationError):
        small_config(hierarchy="mnK", system={"alpha": 2})
    with pytest.raises(ValidationError):
        small_config(hierarchy="mn", shifted=True)
    with pytest.raises(ValidationError):
        small_config(hierarchy="localized")
    with pytest.raises(ValidationError):
        small_config(grid={"length": 10.0, "points": 100})
    with pytest.raises(ValidationError):
        small_config(checkpoints=[0.1, -0.2])


def test_overrides_are_validated(tmp_path):
    cfg = small_config().with_overrides(scenario=Scenario.ENSEMBLE, seed=9, paths=5, dt=0.005, output_dir=tmp_path)
    assert cfg.scenario is Scenario.ENSEMBLE
    assert (cfg.seed, cfg.paths, cfg.scheme.dt) == (9, 5, 0.005)
    assert cfg.output_dir == tmp_path
    with pytest.raises(ValidationError):
        small_config().with_overrides(dt=1.0)


def test_checkpoint_steps():
    cfg = small_config(checkpoints=[0.04, 0.02, 0.5])
    assert cfg.checkpoints == [0.02, 0.04, 0.5]
    marks = cfg.checkpoint_steps()
    assert [index for _, index in marks] == [0, 2, 4]
    assert marks[1][0] == pytest.approx(0.02)


@pytest.mark.parametrize("name", sorted(path.stem for path in CONFIGS.glob("*.json")))
def test_shipped_configs_load(name):
    cfg = load_config(CONFIGS / f"{name}.json")
    assert cfg.scenario.value == name


def test_settings_normalize_log_level():
    assert HarnessSettings(log_level="debug").log_level == "DEBUG"


######################################################
## Scenarios
######################################################


def test_selector():
    assert set(get_available_scenarios()) == {scenario.value for scenario in Scenario}
    assert get_runner(Scenario.SIMULATE) is run_simulation
    assert get_runner(Scenario.COUNTEREXAMPLE) is run_counterexample
    with pytest.raises(ValueError):
        get_runner(None)


def test_simulation_rows():
    result = run_scenario(small_config())
    assert result.verdicts == {"no_blowup": True}
    assert len(result.rows) == 2 * 6
    assert [row.path_id for row in result.rows] == [0] * 6 + [1] * 6
    assert result.rows[0].t == 0.0
    assert all(row.x_norm is None for row in result.rows)


def test_simulation_does_not_depend_on_threads():
    cfg = small_config(paths=3)
    assert run_simulation(cfg, threads=1).rows == run_simulation(cfg, threads=3).rows


def test_tracked_norms_appear_in_rows():
    result = run_simulation(small_config(paths=1, track_norms=True))
    norms = [row.x_norm for row in result.rows]
    assert all(value is not None for value in norms)
    assert norms == sorted(norms)


def test_blowup_marker_row():
    result = run_simulation(small_config(paths=1, scheme={"dt": 0.01, "T0": 0.05, "blowup_threshold": 1e-3}))
    assert result.verdicts == {"no_blowup": False}
    marker = result.rows[-1]
    assert marker.blowup and marker.mass is None
    assert marker.t == pytest.approx(0.01)


def test_small_ensemble():
    cfg = small_config(scenario="ensemble", paths=4, checkpoints=[0.02, 0.04])
    outcome = run_ensemble(cfg)
    assert outcome.paths == 4 and outcome.blown_up == 0
    assert outcome.verdicts["blowup_fraction"]
    assert outcome.verdicts["moments_finite"]
    assert "mass_drift_oracle" in outcome.verdicts
    assert len(outcome.moments.estimates) == 3
    assert outcome.curves["moments"][0]["t"] == 0.0


def test_small_conservation_run():
    cfg = small_config(
        scenario="conserve",
        hierarchy="mnK",
        approx={"K": 1.0},
        noise={"enabled": False},
        scheme={"dt": 0.01, "T0": 0.02},
        conservation={"dts": [0.01, 0.005, 0.0025], "lyapunov_K": [4.0], "lyapunov_trials": 5},
    )
    result = run_scenario(cfg)
    assert set(result.verdicts) == {"mass_drift", "momentum_drift", "energy_drift", "richardson_order"}
    assert result.verdicts["mass_drift"]
    assert set(result.curves) == {"conservation_dt0", "conservation_dt1", "conservation_dt2", "lyapunov"}
    assert result.summary["lyapunov_constants"]["4.0"] > 0


def _ladder(grid: Grid1D, dts, u_power: float, w_power: float):
    base = np.exp(-(grid.x**2) / 8.0)
    return [
        State(ComplexField(grid, base * (1 + 1j) + dt**u_power * base), RealField(grid, base + dt**w_power * base))
        for dt in dts
    ]


def test_richardson_order():
    grid = Grid1D(16 * math.pi, 64)
    dts = [0.04, 0.02, 0.01]
    order, error = richardson_order(_ladder(grid, dts, 2.0, 2.0), 2.0)
    assert order == pytest.approx(2.0, abs=1e-9)
    assert error == pytest.approx(0.0, abs=1e-9)
    order, _ = richardson_order(_ladder(grid, dts, 1.0, 1.0), 2.0)
    assert order == pytest.approx(1.0, abs=1e-9)
    order, error = richardson_order(_ladder(grid, dts, 2.0, 3.0), 2.0)
    assert 2.0 < order < 3.0
    assert error == pytest.approx(max(order - 2.0, 3.0 - order), abs=1e-9)
    with pytest.raises(InvalidArgumentError):
        richardson_order(_ladder(grid, dts[:2], 2.0, 2.0), 2.0)


def test_conservation_needs_geometric_time_steps():
    with pytest.raises(ValidationError):
        small_config(conservation={"dts": [0.01, 0.005, 0.001]})
    assert small_config().conservation.order_target == 2.0


def test_contraction_spec():
    study = small_config().contraction
    assert study.expected_slope == pytest.approx(0.1)
    assert study.all_horizons() == [0.2, 0.16, 0.1, 0.08, 0.05, 0.04, 0.02]
    with pytest.raises(ValidationError):
        small_config(contraction={"a": 0.5})
    with pytest.raises(ValidationError):
        small_config(contraction={"slope_horizons": [0.1]})


def test_small_contraction_run():
    cfg = small_config(
        scenario="contraction",
        contraction={"pairs": 2, "timesteps": 16, "points": 64, "horizons": [0.16, 0.04]},
    )
    result = run_scenario(cfg)
    assert set(result.verdicts) == {"contraction_below_one", "contraction_monotone", "contraction_slope"}
    report = result.reports[0]
    assert report.abscissae == [0.16, 0.08, 0.04, 0.02]
    assert report.expected_slope == pytest.approx(0.1)
    assert report.tolerance == 0.25
    assert report.within_tolerance == (abs(report.slope - 0.1) <= 0.25)
    assert result.verdicts["contraction_slope"] == (report.slope >= 0.1 - 0.25)
    assert result.verdicts["contraction_below_one"]
    assert result.summary["horizons"] == [0.16, 0.08, 0.04, 0.02]
    assert len(result.curves["contraction"]) == 2 * 4


def test_counterexample_scenario():
    cfg = ExperimentConfig(scenario=Scenario.COUNTEREXAMPLE)
    result = run_counterexample(cfg)
    assert result.passed, result.summary
    assert [entry["n"] for entry in result.curves["counterexample"]] == [4, 8, 16, 32]
    assert result.reports[0].lemma == "counterexample"


######################################################
## Outputs
######################################################


def test_format_cell():
    assert format_cell(None) == ""
    assert format_cell(True) == "1"
    assert format_cell(0.1) == "0.10000000000000001"
    assert format_cell(3) == "3"


def test_outputs_are_byte_identical(tmp_path):
    cfg = small_config()
    first = emit_outputs(run_simulation(cfg), cfg, tmp_path / "first")
    second = emit_outputs(run_simulation(cfg, threads=2), cfg, tmp_path / "second")
    assert [path.name for path in first] == [DIAGNOSTICS_FILE, SUMMARY_FILE]
    for one, other in zip(first, second):
        assert one.read_bytes() == other.read_bytes()


def test_diagnostics_csv(tmp_path):
    cfg = small_config()
    emit_outputs(run_simulation(cfg), cfg, tmp_path)
    with (tmp_path / DIAGNOSTICS_FILE).open(encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == COLUMNS
    assert len(rows) == 1 + 12
    assert rows[1][COLUMNS.index("x_norm")] == ""
    assert rows[1][COLUMNS.index("blowup")] == "0"


def test_empty_run_writes_header_only(tmp_path):
    cfg = small_config()
    emit_outputs(RunResult(scenario=Scenario.SIMULATE), cfg, tmp_path)
    assert (tmp_path / DIAGNOSTICS_FILE).read_text(encoding="utf-8") == ",".join(COLUMNS) + "\n"


def test_summary_echoes_config(tmp_path):
    cfg = small_config(scenario="counterexample")
    emit_outputs(run_counterexample(cfg), cfg, tmp_path)
    summary = json.loads((tmp_path / SUMMARY_FILE).read_text(encoding="utf-8"))
    assert summary["scenario"] == "counterexample"
    assert summary["master_seed"] == 3
    assert ExperimentConfig.model_validate(summary["config"]) == cfg
    assert (tmp_path / "curve_counterexample.csv").exists()
    assert (tmp_path / "report_counterexample.json").exists()


######################################################
## Command line
######################################################


def test_cli_exit_codes(tmp_path):
    runner = CliRunner()
    config = write_config(tmp_path, {"scenario": "counterexample"})
    result = runner.invoke(app, ["counterexample", "--config", str(config), "--out", str(tmp_path / "ok")])
    assert result.exit_code == EXIT_PASSED, result.output
    assert (tmp_path / "ok" / SUMMARY_FILE).exists()

    strict = write_config(tmp_path, {"counterexample": {"tolerance": 1e-9}})
    result = runner.invoke(app, ["counterexample", "--config", str(strict), "--out", str(tmp_path / "strict")])
    assert result.exit_code == EXIT_VERDICT_FAILED

    broken = write_config(tmp_path, {"unknown": 1})
    result = runner.invoke(app, ["counterexample", "--config", str(broken), "--out", str(tmp_path / "broken")])
    assert result.exit_code == EXIT_ERROR


######################################################
## Shipped scenarios
######################################################


@pytest.mark.slow
@pytest.mark.parametrize("name", ["probe", "conserve", "contraction"])
def test_shipped_scenario_passes(name, tmp_path):
    cfg = load_config(CONFIGS / f"{name}.json")
    result = run_scenario(cfg, threads=4)
    emit_outputs(result, cfg, tmp_path)
    assert result.passed, result.verdicts


@pytest.mark.slow
@pytest.mark.parametrize("order", [1, 2])
def test_shipped_ensemble_passes(order, tmp_path):
    raw = json.loads((CONFIGS / "ensemble.json").read_text(encoding="utf-8"))
    cfg = ExperimentConfig.model_validate({**raw, "moment_order": order})
    assert cfg.paths == 400 and cfg.scheme.T0 == 1.0
    result = run_scenario(cfg, threads=4)
    emit_outputs(result, cfg, tmp_path)
    assert result.verdicts["blowup_fraction"]
    assert result.verdicts["moments_finite"]
    assert result.verdicts["moments_m_stable"], result.summary
    assert result.verdicts["mass_drift_oracle"], result.summary
    assert result.passed
