"""Periodic (single- and multi-stage) calibration protocols."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .. import seeding
from ..errors import ConfigurationError
from ..measurement import PilotPlan, generate_phase_schedule, measure
from ..propagation import PropagationSet, SimSystem
from .gradient import GradientSettings, run_gradient_stage
from .objective import nmse_db, pilot_loss

log = logging.getLogger(__name__)

SINGLE_STAGE = "SingleStage"
MULTI_STAGE = "MultiStage"


@dataclass(frozen=True)
class StagePlan:
    num_stages: int = 10
    slots_per_stage: int = 100
    mode: str = MULTI_STAGE

    def __post_init__(self):
        if self.mode not in (SINGLE_STAGE, MULTI_STAGE):
            raise ConfigurationError(f"mode must be {SINGLE_STAGE!r} or {MULTI_STAGE!r}")
        if self.num_stages < 1 or self.slots_per_stage < 1:
            raise ConfigurationError("num_stages and slots_per_stage must be >= 1")
        if self.mode == SINGLE_STAGE and self.num_stages != 1:
            raise ConfigurationError("SingleStage mode requires num_stages == 1")


class PilotSource:
    """The physical system as seen by the calibrator: it only returns pilot measurements.

    The practical matrices stay private; calibration code never reads them.
    """

    def __init__(self, system: SimSystem, practical: PropagationSet, snr_db="noiseless", pilot_symbol=1 + 0j):
        self.system = system
        self._practical = practical
        self.snr_db = snr_db
        self.pilot_symbol = pilot_symbol

    def acquire(self, num_slots: int, phase_seed: int, noise_seed: int):
        plan = PilotPlan(num_slots, phase_seed, self.pilot_symbol, self.snr_db)
        schedule = generate_phase_schedule(self.system.config, plan)
        return measure(self._practical, schedule, plan, noise_seed)


@dataclass
class StageRecord:
    stage: int
    nmse_db: dict[str, float]
    loss_history: list[float] = field(default_factory=list)
    initial_loss: float = float("nan")
    final_loss: float = float("nan")
    step_size: float = 0.0
    status: str = "baseline"


@dataclass
class CalibrationTrace:
    stages: list[StageRecord]
    estimate: PropagationSet
    metadata: dict

    @property
    def matrix_names(self) -> list[str]:
        return list(self.stages[0].nmse_db)

    def nmse_table(self) -> np.ndarray:
        """(num_stages + 1, num_matrices) array of NMSE in dB."""
        return np.array([[r.nmse_db[n] for n in self.matrix_names] for r in self.stages])

    def reduction_db(self) -> dict[str, float]:
        first, last = self.stages[0].nmse_db, self.stages[-1].nmse_db
        return {n: first[n] - last[n] for n in self.matrix_names}

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["stage", "matrix_name", "nmse_db", "loss_final", "step_size"])
            for r in self.stages:
                for n in self.matrix_names:
                    w.writerow([r.stage, n, repr(r.nmse_db[n]), repr(r.final_loss), repr(r.step_size)])

    def write_metadata(self, path):
        with open(path, "w") as f:
            json.dump(self.metadata, f, indent=2, sort_keys=True)
            f.write("\n")


def stage_nmse(estimate: PropagationSet, truth: PropagationSet, names) -> dict[str, float]:
    return {n: nmse_db(estimate[n], truth[n]) for n in names}


def run_multistage(
    system: SimSystem,
    source: PilotSource,
    plan: StagePlan,
    settings: GradientSettings,
    master_seed: int,
    *,
    truth: PropagationSet | None = None,
    scales=None,
    initial: PropagationSet | None = None,
    on_stage=None,
) -> CalibrationTrace:
    """Warm-started stage sequence; stage 1 starts from the ideal model.

    ``truth`` is used only to score each stage.  It defaults to the source's
    practical set, and replacing it never changes the estimates.
    """
    truth = truth if truth is not None else source._practical
    names = system.unknown_names
    ideal = system.ideal_set
    estimate = initial if initial is not None else ideal
    records = [StageRecord(0, stage_nmse(ideal, truth, names))]
    if on_stage:
        on_stage(records[0])
    for s in range(1, plan.num_stages + 1):
        meas = source.acquire(
            plan.slots_per_stage,
            seeding.derive_seed(master_seed, seeding.PHASES, s),
            seeding.derive_seed(master_seed, seeding.NOISE, s),
        )
        if s == 1:
            records[0].final_loss = records[0].initial_loss = pilot_loss(ideal, meas)
        stage_settings = settings.for_stage(s)
        result = run_gradient_stage(
            estimate, meas, stage_settings, unknowns=names, scales=scales, reference=ideal
        )
        estimate = result.estimate
        rec = StageRecord(
            s,
            stage_nmse(estimate, truth, names),
            result.loss_history,
            result.initial_loss,
            result.final_loss,
            stage_settings.step_size,
            result.status,
        )
        records.append(rec)
        if on_stage:
            on_stage(rec)
    meta = {
        "master_seed": int(master_seed),
        "settings": settings.to_dict(),
        "plan": {"num_stages": plan.num_stages, "slots_per_stage": plan.slots_per_stage, "mode": plan.mode},
        "unknowns": names,
    }
    return CalibrationTrace(records, estimate, meta)
