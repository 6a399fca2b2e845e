"""Named experiments driven by a :class:`~simcal.scenario.Scenario`."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import seeding
from .calibration import (
    CalibrationTrace,
    DriftingSource,
    MonitorLog,
    PilotSource,
    StagePlan,
    StageRecord,
    block_scales,
    codebook_search,
    prior_scales,
    run_multistage,
    state_driven_monitor,
)
from .calibration.protocol import stage_nmse
from .geometry import ErrorBounds, ErrorState, sample_errors
from .propagation import PropagationSet, SimSystem
from .reporting import HeatmapBundle, SweepSpec, heatmap_bundle, run_tasks, select_heatmap_matrix, summarize_sweep
from .scenario import Scenario

log = logging.getLogger(__name__)


@dataclass
class CalibrationRun:
    scenario: Scenario
    system: SimSystem
    errors: ErrorState
    practical: PropagationSet
    trace: CalibrationTrace


def scenario_errors(scn: Scenario, bounds: ErrorBounds | None = None, master_seed: int | None = None) -> ErrorState:
    explicit = scn.explicit_errors()
    if explicit is not None and bounds is None:
        return explicit
    bounds = bounds if bounds is not None else scn.error_bounds()
    seed = scn.seed if master_seed is None else master_seed
    return sample_errors(bounds, seeding.derive_seed(seed, seeding.ERRORS), scn.stack.num_layers)


def preconditioner(scn: Scenario, system: SimSystem, bounds: ErrorBounds):
    if scn.gradient.preconditioner == "block":
        return block_scales(system.ideal_set, system.unknown_names)
    return prior_scales(system, bounds, scn.gradient.prior_ridge)


def calibrate(
    scn: Scenario,
    *,
    errors: ErrorState | None = None,
    bounds: ErrorBounds | None = None,
    master_seed: int | None = None,
    plan: StagePlan | None = None,
    system: SimSystem | None = None,
    on_stage=None,
) -> CalibrationRun:
    """Sample (or take) an error state and run the scenario's calibration strategy."""
    seed = scn.seed if master_seed is None else master_seed
    system = system or scn.system()
    bounds = bounds if bounds is not None else scn.error_bounds()
    errors = errors if errors is not None else scenario_errors(scn, bounds if scn.explicit_errors() is None else None, seed)
    plan = plan or scn.stage_plan()
    practical = system.propagation_set(errors)
    source = PilotSource(system, practical, scn.pilot.snr_db, scn.pilot_symbol)
    settings = scn.gradient_settings()
    scales = preconditioner(scn, system, bounds)
    strategy = scn.calibration.strategy
    meta = {"scenario": scn.name, "scenario_sha256": scn.digest(), "strategy": strategy, "errors": errors.to_dict()}

    initial = None
    if strategy in ("codebook", "hybrid"):
        meas = source.acquire(
            plan.slots_per_stage,
            seeding.derive_seed(seed, seeding.CODEBOOK, seeding.PHASES),
            seeding.derive_seed(seed, seeding.CODEBOOK, seeding.NOISE),
        )
        found = codebook_search(system, meas, scn.codebook_for(bounds))
        meta["codebook"] = {
            "errors": found.errors.to_dict(),
            "loss": found.loss,
            "coarse_loss": found.coarse_loss,
            "evaluations": found.evaluations,
        }
        initial = found.estimate
        if strategy == "codebook":
            names = system.unknown_names
            records = [
                StageRecord(0, stage_nmse(system.ideal_set, practical, names)),
                StageRecord(1, stage_nmse(found.estimate, practical, names), [found.loss], found.coarse_loss, found.loss, 0.0, "codebook"),
            ]
            trace = CalibrationTrace(records, found.estimate, {"master_seed": seed, **meta})
            return CalibrationRun(scn, system, errors, practical, trace)

    trace = run_multistage(system, source, plan, settings, seed, scales=scales, initial=initial, on_stage=on_stage)
    trace.metadata.update(meta)
    return CalibrationRun(scn, system, errors, practical, trace)


# -- robustness sweep -------------------------------------------------------


def sweep_spec(scn: Scenario) -> SweepSpec:
    if scn.sweep is None:
        raise ValueError("scenario has no 'sweep' section")
    return SweepSpec(scn.sweep.parameter, tuple(scn.sweep.grid), scn.sweep.slots, scn.sweep.seeds_per_point)


def _bound_value(scn: Scenario, value: float) -> float:
    unit = scn.sweep.unit
    if scn.sweep.parameter == "e_P":
        return float(np.radians(value)) if unit == "deg" else value
    return value * scn.length_unit(unit)


def _sweep_point(task):
    scn, grid_index, seed_index, value = task
    spec = sweep_spec(scn)
    bound = _bound_value(scn, value)
    bounds = ErrorBounds(**{k: (bound if k == spec.swept_parameter else 0.0) for k in ("e_I", "e_V", "e_P")})
    # common random numbers: seed index j draws the same normalized errors at every grid point
    run_seed = seeding.derive_seed(scn.seed, seeding.SWEEP, seed_index)
    plan = StagePlan(1, spec.slots, "SingleStage")
    run = calibrate(scn, bounds=bounds, master_seed=run_seed, plan=plan, errors=scenario_errors(scn, bounds, run_seed))
    trace = run.trace
    rows = []
    inter = [n for n in trace.matrix_names if n.startswith("W") and n != "W_out"]
    pre, post = trace.stages[0].nmse_db, trace.stages[-1].nmse_db
    for name in trace.matrix_names:
        rows.append((grid_index, value, seed_index, run_seed, name, pre[name], post[name]))
    rows.append(
        (grid_index, value, seed_index, run_seed, "interlayer_mean",
         float(np.mean([pre[n] for n in inter])), float(np.mean([post[n] for n in inter])))
    )
    return rows


SWEEP_COLUMNS = ["grid_index", "bound", "seed_index", "seed", "matrix", "uncalibrated_nmse_db", "calibrated_nmse_db"]


def robustness_sweep(scn: Scenario, workers: int = 1) -> tuple[pd.DataFrame, pd.DataFrame]:
    spec = sweep_spec(scn)
    tasks = [(scn, i, j, v) for i, v in enumerate(spec.grid) for j in range(spec.seeds_per_point)]
    rows = [r for chunk in run_tasks(_sweep_point, tasks, workers) for r in chunk]
    df = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    return df, summarize_sweep(df)


# -- heatmap ----------------------------------------------------------------


def heatmap(scn: Scenario) -> tuple[HeatmapBundle, CalibrationRun]:
    run = calibrate(scn)
    which = scn.heatmap.matrix or select_heatmap_matrix(run.trace)
    bundle = heatmap_bundle(run.system.ideal_set, run.practical, run.trace.estimate, which)
    return bundle, run


# -- state-driven monitoring -------------------------------------------------


@dataclass
class MonitorRun:
    log: MonitorLog
    change_slot: int | None
    errors_before: ErrorState
    errors_after: ErrorState
    initial_estimate_loss: float


def monitor(scn: Scenario) -> MonitorRun:
    """Calibrate on the pre-change system, then monitor across a scripted error step."""
    if scn.monitor is None:
        raise ValueError("scenario has no 'monitor' section")
    mon = scn.monitor
    run = calibrate(scn)
    system, bounds = run.system, scn.error_bounds()
    before = run.errors
    step = sample_errors(bounds.scaled(mon.drift_scale), seeding.derive_seed(scn.seed, seeding.MONITOR, seeding.ERRORS), scn.stack.num_layers)
    after = ErrorState.from_array(before.as_array() + step.as_array())
    snr, sym = scn.pilot.snr_db, scn.pilot_symbol
    segments = [(0, PilotSource(system, run.practical, snr, sym))]
    if mon.change_slot is not None:
        segments.append((mon.change_slot, PilotSource(system, system.propagation_set(after), snr, sym)))
    settings = scn.gradient_settings().for_stage(scn.stages.num_stages)
    mlog = state_driven_monitor(
        run.trace.estimate,
        DriftingSource(segments),
        mon.num_data_slots,
        mon.threshold,
        mon.window,
        settings,
        master_seed=scn.seed,
        known_every=mon.known_every,
        calibration_slots=mon.calibration_slots,
        unknowns=system.unknown_names,
        scales=preconditioner(scn, system, bounds.scaled(1 + mon.drift_scale)),
        reference=system.ideal_set,
    )
    return MonitorRun(mlog, mon.change_slot, before, after, run.trace.stages[-1].final_loss)
