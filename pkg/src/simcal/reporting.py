"""Figure-grade tables: stage curves, robustness sweeps and heatmap panels."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .calibration import CalibrationTrace
from .errors import ConfigurationError
from .propagation import PropagationSet


def stage_curve(trace: CalibrationTrace, seed: int | None = None) -> pd.DataFrame:
    """Long table with one row per (stage, matrix); stage 0 is the uncalibrated baseline."""
    seed = trace.metadata.get("master_seed") if seed is None else seed
    rows = [
        {"seed": seed, "stage": rec.stage, "matrix": name, "nmse_db": rec.nmse_db[name]}
        for rec in trace.stages
        for name in trace.matrix_names
    ]
    return pd.DataFrame(rows, columns=["seed", "stage", "matrix", "nmse_db"])


def write_table(df: pd.DataFrame, path) -> Path:
    path = Path(path)
    df.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path


def read_table(path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


@dataclass(frozen=True)
class SweepSpec:
    swept_parameter: str
    grid: tuple[float, ...]
    slots: int
    seeds_per_point: int

    def __post_init__(self):
        if self.swept_parameter not in ("e_I", "e_V", "e_P"):
            raise ConfigurationError("swept_parameter must be e_I, e_V or e_P")
        g = tuple(float(x) for x in self.grid)
        if not g or any(x < 0 for x in g) or any(b <= a for a, b in zip(g, g[1:])):
            raise ConfigurationError("sweep grid must be non-empty, non-negative and strictly increasing")
        if self.slots < 1 or self.seeds_per_point < 1:
            raise ConfigurationError("slots and seeds_per_point must be >= 1")
        object.__setattr__(self, "grid", g)


def run_tasks(fn, tasks, workers: int = 1) -> list:
    """Map ``fn`` over ``tasks`` keeping input order regardless of worker count."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def summarize_sweep(rows: pd.DataFrame) -> pd.DataFrame:
    """Per grid point: mean and min/median/max over seeds of the interlayer-mean NMSE."""
    per_seed = rows[rows["matrix"] == "interlayer_mean"]
    out = []
    for (idx, bound), grp in per_seed.groupby(["grid_index", "bound"], sort=True):
        rec = {"grid_index": idx, "bound": bound, "num_seeds": len(grp)}
        for col in ("uncalibrated_nmse_db", "calibrated_nmse_db"):
            v = grp[col].to_numpy()
            rec[f"{col}_mean"] = float(v.mean())
            rec[f"{col}_min"] = float(v.min())
            rec[f"{col}_median"] = float(np.median(v))
            rec[f"{col}_max"] = float(v.max())
        out.append(rec)
    return pd.DataFrame(out)


@dataclass(frozen=True)
class HeatmapBundle:
    matrix: str
    ideal: np.ndarray
    practical: np.ndarray
    calibrated: np.ndarray
    difference: np.ndarray

    def panels(self) -> dict[str, np.ndarray]:
        return {
            "ideal": self.ideal,
            "practical": self.practical,
            "calibrated": self.calibrated,
            "difference": self.difference,
        }

    def residual_ratio(self) -> float:
        """Largest magnitude gap after calibration over the largest one before it."""
        before = np.max(np.abs(self.practical - self.ideal))
        return float(np.max(self.difference) / before) if before > 0 else float("inf")

    def write(self, directory, prefix="heatmap") -> list[Path]:
        directory = Path(directory)
        paths = []
        for name, panel in self.panels().items():
            p = directory / f"{prefix}_{name}.txt"
            np.savetxt(p, panel, fmt="%.12g", delimiter=" ")
            paths.append(p)
        return paths


def select_heatmap_matrix(trace: CalibrationTrace) -> str:
    """Interlayer matrix with the largest uncalibrated NMSE."""
    baseline = trace.stages[0].nmse_db
    candidates = [n for n in trace.matrix_names if n.startswith("W") and n != "W_out"]
    return max(candidates, key=lambda n: baseline[n])


def heatmap_bundle(
    ideal: PropagationSet, practical: PropagationSet, calibrated: PropagationSet, which: str | int
) -> HeatmapBundle:
    """Magnitude panels of one interlayer matrix; ``which`` is a name (``"W2"``) or 1-based index."""
    if isinstance(which, (int, np.integer)):
        if not 1 <= which <= len(ideal.interlayer):
            raise IndexError(f"interlayer index {which} out of range 1..{len(ideal.interlayer)}")
        which = f"W{which}"
    if which not in ideal.names:
        raise IndexError(f"unknown matrix {which!r}")
    mags = [np.abs(s[which]) for s in (ideal, practical, calibrated)]
    return HeatmapBundle(which, *mags, np.abs(mags[1] - mags[2]))
