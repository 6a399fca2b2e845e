"""Pilot observations of the practical (error-perturbed) SIM."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DimensionError
from .geometry import SimStackConfig
from .propagation import PropagationSet, cascade_response

NOISELESS = "noiseless"


@dataclass(frozen=True)
class PilotPlan:
    num_slots: int
    phase_seed: int = 0
    pilot_symbol: complex = 1 + 0j
    snr_db: float | str = NOISELESS

    def __post_init__(self):
        if self.num_slots < 1:
            raise ConfigurationError(f"num_slots must be >= 1 (got {self.num_slots})")
        if self.snr_db != NOISELESS and (not isinstance(self.snr_db, (int, float)) or math.isnan(self.snr_db)):
            raise ConfigurationError(f"snr_db must be a number or 'noiseless' (got {self.snr_db!r})")
        if self.snr_db != NOISELESS and self.snr_db == -math.inf:
            raise ConfigurationError("snr_db must not be -inf")

    @property
    def noiseless(self) -> bool:
        return self.snr_db == NOISELESS or self.snr_db == math.inf


@dataclass(frozen=True)
class MeasurementSet:
    """Phases (T, L, N) applied in each slot and received vectors (T, N_rx)."""

    phases: np.ndarray
    y: np.ndarray
    pilot_symbol: complex = 1 + 0j

    def __post_init__(self):
        if self.phases.ndim != 3 or self.y.ndim != 2 or self.phases.shape[0] != self.y.shape[0]:
            raise DimensionError(f"phases {self.phases.shape} and y {self.y.shape} disagree on slot count")

    @property
    def num_slots(self) -> int:
        return self.y.shape[0]

    def __len__(self):
        return self.num_slots

    def subset(self, slots) -> MeasurementSet:
        return MeasurementSet(self.phases[slots], self.y[slots], self.pilot_symbol)

    def to_csv(self, path, schedule_path=None):
        """Write ``slot,rx_index,re,im`` rows and a ``slot,layer,atom,phase_radians`` sidecar."""
        path = Path(path)
        schedule_path = Path(schedule_path) if schedule_path else path.with_name(path.stem + "_schedule.csv")
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["slot", "rx_index", "re", "im"])
            for t, row in enumerate(self.y):
                for r, v in enumerate(row):
                    w.writerow([t, r, repr(float(v.real)), repr(float(v.imag))])
        with open(schedule_path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["slot", "layer", "atom", "phase_radians"])
            for (t, l, n), v in np.ndenumerate(self.phases):
                w.writerow([t, l + 1, n, repr(float(v))])
        return path, schedule_path

    @classmethod
    def from_csv(cls, path, schedule_path=None, pilot_symbol: complex = 1 + 0j) -> MeasurementSet:
        path = Path(path)
        schedule_path = Path(schedule_path) if schedule_path else path.with_name(path.stem + "_schedule.csv")
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t, r = rows[:, 0].astype(int), rows[:, 1].astype(int)
        y = np.zeros((t.max() + 1, r.max() + 1), complex)
        y[t, r] = rows[:, 2] + 1j * rows[:, 3]
        srows = np.loadtxt(schedule_path, delimiter=",", skiprows=1, ndmin=2)
        idx = srows[:, :3].astype(int)
        phases = np.zeros((idx[:, 0].max() + 1, idx[:, 1].max(), idx[:, 2].max() + 1))
        phases[idx[:, 0], idx[:, 1] - 1, idx[:, 2]] = srows[:, 3]
        return cls(phases, y, pilot_symbol)


def generate_phase_schedule(config: SimStackConfig, plan: PilotPlan) -> np.ndarray:
    """``(T, L, M^2)`` i.i.d. phases, uniform on [0, 2 pi)."""
    rng = np.random.default_rng(plan.phase_seed)
    return rng.uniform(0.0, 2 * np.pi, (plan.num_slots, config.num_layers, config.atoms_per_layer))


def measure(practical: PropagationSet, schedule: np.ndarray, plan: PilotPlan, noise_seed: int) -> MeasurementSet:
    signal = cascade_response(practical, schedule) * plan.pilot_symbol
    if plan.noiseless:
        return MeasurementSet(np.asarray(schedule, float), signal, plan.pilot_symbol)
    snr = 10.0 ** (plan.snr_db / 10.0)
    noise_power = np.mean(np.abs(signal) ** 2) / snr
    rng = np.random.default_rng(noise_seed)
    noise = rng.standard_normal(signal.shape + (2,)) @ np.array([1.0, 1j]) * math.sqrt(noise_power / 2)
    return MeasurementSet(np.asarray(schedule, float), signal + noise, plan.pilot_symbol)
