import json
import subprocess
import sys

import pandas as pd

from simcal.cli import main


def run_cli(*args):
    return main(list(args))


def test_calibrate_desk_tiny(tmp_path, capsys):
    assert run_cli("calibrate", "--scenario", "desk-tiny", "--out", str(tmp_path)) == 0
    err = capsys.readouterr().err
    assert sum(line.startswith("stage") for line in err.splitlines()) == 11
    trace = pd.read_csv(tmp_path / "trace.csv")
    assert list(trace.columns) == ["stage", "matrix_name", "nmse_db", "loss_final", "step_size"]
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["scenario"] == "desk-tiny" and len(meta["scenario_sha256"]) == 64


def test_calibrate_paper_scenario_has_eleven_rows_per_matrix(tmp_path):
    assert run_cli("calibrate", "--scenario", "paper-fig4a", "--out", str(tmp_path), "--override", "gradient.max_iters_per_stage=2") == 0
    counts = pd.read_csv(tmp_path / "trace.csv").groupby("matrix_name").size()
    assert set(counts.index) == {"h", "W1", "W2", "W3"}
    assert (counts == 11).all()


def test_seed_override_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert run_cli("calibrate", "--scenario", "desk-tiny", "--out", str(tmp_path / d), "--override", "seed=7") == 0
    for name in ("trace.csv", "stage_curve.csv", "metadata.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert json.loads((tmp_path / "a" / "metadata.json").read_text())["master_seed"] == 7


def test_seed_flag_changes_output(tmp_path):
    run_cli("calibrate", "--scenario", "desk-tiny", "--out", str(tmp_path / "a"), "--seed", "1")
    run_cli("calibrate", "--scenario", "desk-tiny", "--out", str(tmp_path / "b"), "--seed", "2")
    assert (tmp_path / "a" / "trace.csv").read_bytes() != (tmp_path / "b" / "trace.csv").read_bytes()


def test_schema_error_exit_code(tmp_path, capsys):
    assert run_cli("calibrate", "--scenario", "desk-tiny", "--out", str(tmp_path), "--override", "stack.num_layers=1") == 2
    line = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert line["error"] == "schema" and line["path"] == "stack.num_layers"


def test_bad_file_exit_code(tmp_path, capsys):
    bad = tmp_path / "s.json"
    bad.write_text('{"stack": {"num_layers": 2}, "surprise": 1}')
    assert run_cli("calibrate", "--scenario", str(bad), "--out", str(tmp_path)) == 2


def test_numerical_abort_exit_code(tmp_path, capsys):
    code = run_cli("calibrate", "--scenario", "desk-tiny", "--out", str(tmp_path), "--override", "stack.stack_thickness=1e-6")
    assert code == 3
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "numerical"


def test_validate_passes(tmp_path):
    assert run_cli("validate", "--scenario", "desk-tiny", "--out", str(tmp_path)) == 0
    checks = pd.read_csv(tmp_path / "validate.csv")
    assert checks["passed"].all()


SMALL_SWEEP = ['sweep={"grid": [0.01, 0.02], "slots": 60, "seeds_per_point": 2}', "stages.mode=SingleStage", "stages.num_stages=1"]


def test_sweep_identical_across_worker_counts(tmp_path):
    outs = []
    for workers in (1, 2):
        out = tmp_path / f"w{workers}"
        args = ["sweep", "--scenario", "desk-tiny", "--out", str(out), "--workers", str(workers)]
        for o in SMALL_SWEEP:
            args += ["--override", o]
        assert run_cli(*args) == 0
        outs.append(out)
    for name in ("sweep.csv", "sweep_summary.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_heatmap_writes_four_panels(tmp_path):
    args = ["heatmap", "--scenario", "paper-fig5", "--out", str(tmp_path)]
    args += ["--override", "stack.num_layers=2", "--override", "stages.num_stages=2", "--override", "codebook.levels=1"]
    assert run_cli(*args) == 0
    for panel in ("ideal", "practical", "calibrated", "difference"):
        assert (tmp_path / f"heatmap_{panel}.txt").exists()


def test_monitor_writes_event_log(tmp_path):
    assert run_cli("monitor", "--scenario", "desk-tiny", "--out", str(tmp_path)) == 0
    events = pd.read_csv(tmp_path / "events.csv")
    assert len(events) == 1


def test_console_script_module_entry(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "simcal.cli", "calibrate", "--scenario", "desk-tiny", "--out", str(tmp_path), "--override", "nope"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 2
    assert json.loads(proc.stderr.strip().splitlines()[-1])["error"] == "schema"
