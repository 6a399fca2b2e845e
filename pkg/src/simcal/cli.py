"""``simcal`` command-line entry point."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .errors import SimcalError
from .reporting import stage_curve, write_table
from .scenario import Scenario, ScenarioError, load_scenario
from .validation import run_checks

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_NUMERIC = 0, 1, 2, 3


def _error_line(kind: str, message: str, path: str | None = None) -> None:
    rec = {"error": kind, "message": message}
    if path is not None:
        rec["path"] = path
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _stage_logger(rec) -> None:
    inter = [v for k, v in rec.nmse_db.items() if k.startswith("W") and k != "W_out"]
    mean_all = float(np.mean(list(rec.nmse_db.values())))
    line = f"stage {rec.stage:2d}  mean NMSE {mean_all:8.2f} dB"
    if inter:
        line += f"  interlayer {float(np.mean(inter)):8.2f} dB"
    print(line + f"  [{rec.status}]", file=sys.stderr)


def cmd_calibrate(scn: Scenario, out: Path, args) -> int:
    run = experiments.calibrate(scn, on_stage=_stage_logger)
    trace = run.trace
    trace.to_csv(out / "trace.csv")
    write_table(stage_curve(trace), out / "stage_curve.csv")
    trace.write_metadata(out / "metadata.json")
    red = trace.reduction_db()
    print("reduction dB: " + " ".join(f"{k}={v:.2f}" for k, v in red.items()), file=sys.stderr)
    return EXIT_OK


def cmd_sweep(scn: Scenario, out: Path, args) -> int:
    rows, summary = experiments.robustness_sweep(scn, workers=args.workers)
    write_table(rows, out / "sweep.csv")
    write_table(summary, out / "sweep_summary.csv")
    _write_json(out / "metadata.json", {"scenario": scn.name, "scenario_sha256": scn.digest(), "master_seed": scn.seed})
    for _, r in summary.iterrows():
        print(
            f"bound {r['bound']:.6g}  uncalibrated {r['uncalibrated_nmse_db_mean']:8.2f} dB"
            f"  calibrated {r['calibrated_nmse_db_mean']:8.2f} dB",
            file=sys.stderr,
        )
    return EXIT_OK


def cmd_heatmap(scn: Scenario, out: Path, args) -> int:
    bundle, run = experiments.heatmap(scn)
    bundle.write(out)
    run.trace.to_csv(out / "trace.csv")
    meta = dict(run.trace.metadata)
    meta["heatmap"] = {"matrix": bundle.matrix, "residual_ratio": bundle.residual_ratio()}
    _write_json(out / "metadata.json", meta)
    print(f"heatmap {bundle.matrix}: residual ratio {bundle.residual_ratio():.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_monitor(scn: Scenario, out: Path, args) -> int:
    res = experiments.monitor(scn)
    with open(out / "events.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["slot", "indicator_before", "indicator_after", "calibration_slots", "stage_status"])
        for e in res.log.events:
            w.writerow([e.slot, repr(e.indicator_before), repr(e.indicator_after), e.calibration_slots, e.stage_status])
    with open(out / "indicator.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["slot", "slot_loss", "window_mean"])
        for slot, loss, mean in res.log.indicator:
            w.writerow([slot, repr(loss), repr(mean)])
    _write_json(
        out / "metadata.json",
        {
            "scenario": scn.name,
            "scenario_sha256": scn.digest(),
            "master_seed": scn.seed,
            "change_slot": res.change_slot,
            "errors_before": res.errors_before.to_dict(),
            "errors_after": res.errors_after.to_dict(),
            "num_triggers": len(res.log.events),
        },
    )
    for e in res.log.events:
        print(f"trigger at slot {e.slot}: {e.indicator_before:.3e} -> {e.indicator_after:.3e}", file=sys.stderr)
    return EXIT_OK


def cmd_validate(scn: Scenario, out: Path, args) -> int:
    results = run_checks(scn.system(), scn.seed)
    with open(out / "validate.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["check", "passed", "detail"])
        for r in results:
            w.writerow([r.name, r.passed, r.detail])
            print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}", file=sys.stderr)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


COMMANDS = {
    "calibrate": (cmd_calibrate, "multi-stage calibration, writes trace.csv"),
    "sweep": (cmd_sweep, "error-bound robustness sweep, writes sweep.csv"),
    "heatmap": (cmd_heatmap, "magnitude panels of one interlayer matrix"),
    "monitor": (cmd_monitor, "state-driven recalibration across a scripted change"),
    "validate": (cmd_validate, "gradient and propagation self-checks"),
}

DEFAULT_SCENARIO = {"calibrate": "paper-fig4a", "sweep": "paper-fig4b", "heatmap": "paper-fig5"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simcal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scenario", help="scenario JSON path or bundled name")
        p.add_argument("--out", help="output directory (default: the scenario's output_dir)")
        p.add_argument("--seed", type=int, help="master seed, overrides the scenario")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes for sweeps")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="dotted-key override, JSON value")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fn = COMMANDS[args.command][0]
    overrides = list(args.override)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            _error_line("schema", "seed must be an unsigned 64-bit integer", "seed")
            return EXIT_SCHEMA
        overrides.append(f"seed={args.seed}")
    source = args.scenario or DEFAULT_SCENARIO.get(args.command, "desk-tiny")
    try:
        scn = load_scenario(source, overrides)
        out = Path(args.out or scn.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        return fn(scn, out, args)
    except ScenarioError as exc:
        _error_line("schema", exc.message, exc.path)
        return EXIT_SCHEMA
    except (ArithmeticError, FloatingPointError) as exc:
        _error_line("numerical", str(exc))
        return EXIT_NUMERIC
    except (SimcalError, ValueError, IndexError) as exc:
        _error_line("config", str(exc))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
