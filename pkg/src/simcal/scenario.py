"""Scenario files: strict JSON documents describing one experiment."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .calibration import Codebook, GradientSettings, StagePlan
from .errors import SimcalError
from .geometry import SPEED_OF_LIGHT, ErrorBounds, ErrorState, SimStackConfig
from .propagation import SceneConfig, SimSystem, default_rx_grid, ue_at


class ScenarioError(SimcalError, ValueError):
    """Schema violation; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class StackSpec(_Strict):
    num_layers: int = Field(ge=2)
    atoms_per_side: int = Field(ge=1)
    frequency_hz: Optional[float] = Field(default=None, gt=0)
    wavelength: Optional[float] = Field(default=None, gt=0)
    stack_thickness: float = Field(gt=0)
    atom_pitch: Optional[float] = Field(default=None, gt=0)
    atom_area: Optional[float] = Field(default=None, gt=0)
    spacing_mode: Literal["cumulative", "independent"] = "cumulative"

    @model_validator(mode="after")
    def _one_wavelength_source(self):
        if (self.frequency_hz is None) == (self.wavelength is None):
            raise ValueError("give exactly one of frequency_hz or wavelength")
        return self

    def resolved_wavelength(self) -> float:
        return self.wavelength if self.wavelength is not None else SPEED_OF_LIGHT / self.frequency_hz


class ExplicitErrors(_Strict):
    delta_spacing: list[float]
    delta_vertical: list[float]
    delta_rotation_deg: list[float]


class ErrorSpec(_Strict):
    unit: Literal["m", "wavelength"] = "wavelength"
    e_I: float = Field(default=0.0, ge=0)
    e_V: float = Field(default=0.0, ge=0)
    e_P_deg: float = Field(default=0.0, ge=0)
    explicit: Optional[ExplicitErrors] = None


class SceneSpec(_Strict):
    ue_distance: float = Field(default=30.0, gt=0)
    ue_azimuth_deg: float = 20.0
    ue_elevation_deg: float = 45.0
    ue_position: Optional[list[float]] = None
    rx_side: int = Field(default=6, ge=1)
    rx_standoff_wavelengths: float = Field(default=1.0, gt=0)
    rx_positions: Optional[list[list[float]]] = None
    model: Literal["RayleighSommerfeld", "GeometricRadar"] = "RayleighSommerfeld"

    @field_validator("ue_position")
    @classmethod
    def _three(cls, v):
        if v is not None and len(v) != 3:
            raise ValueError("ue_position needs 3 coordinates")
        return v

    @field_validator("rx_positions")
    @classmethod
    def _rx_three(cls, v):
        if v is not None and (not v or any(len(p) != 3 for p in v)):
            raise ValueError("rx_positions must be a non-empty list of 3-D points")
        return v


class PilotSpec(_Strict):
    snr_db: Union[float, Literal["noiseless"]] = "noiseless"
    pilot_symbol: tuple[float, float] = (1.0, 0.0)


class StageSpec(_Strict):
    mode: Literal["SingleStage", "MultiStage"] = "MultiStage"
    num_stages: int = Field(default=10, ge=1)
    slots_per_stage: int = Field(default=100, ge=1)

    @model_validator(mode="after")
    def _single(self):
        if self.mode == "SingleStage" and self.num_stages != 1:
            raise ValueError("SingleStage mode requires num_stages == 1")
        return self


class GradientSpec(_Strict):
    step_size: float = Field(default=0.05, gt=0)
    stage_decay: float = Field(default=0.8, gt=0, le=1)
    max_iters_per_stage: int = Field(default=200, ge=0)
    regularization_weight: float = Field(default=0.0, ge=0)
    convergence_tol: float = Field(default=1e-8, gt=0)
    preconditioner: Literal["prior", "block"] = "prior"
    prior_ridge: float = Field(default=1e-3, ge=0)


class CodebookSpec(_Strict):
    points: int = Field(default=3, ge=1)
    refinement_factor: float = Field(default=2.0, gt=1)
    levels: int = Field(default=8, ge=0)
    max_sweeps: int = Field(default=4, ge=1)

    @field_validator("points")
    @classmethod
    def _odd(cls, v):
        if v % 2 == 0:
            raise ValueError("points must be odd so the grid contains 0")
        return v


class CalibrationSpec(_Strict):
    strategy: Literal["gradient", "codebook", "hybrid"] = "gradient"
    unknown_w_out: bool = False


class SweepSpecModel(_Strict):
    parameter: Literal["e_I", "e_V", "e_P"] = "e_V"
    grid: list[float] = Field(min_length=1)
    unit: Literal["m", "wavelength", "deg"] = "wavelength"
    slots: int = Field(default=1000, ge=1)
    seeds_per_point: int = Field(default=5, ge=1)

    @field_validator("grid")
    @classmethod
    def _increasing(cls, v):
        if any(x < 0 for x in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("grid must be non-negative and strictly increasing")
        return v


class HeatmapSpec(_Strict):
    matrix: Optional[str] = None


class MonitorSpec(_Strict):
    threshold: float = Field(default=1e-3, gt=0)
    window: int = Field(default=5, ge=1)
    known_every: int = Field(default=20, ge=1)
    num_data_slots: int = Field(default=2000, ge=1)
    change_slot: Optional[int] = Field(default=1000, ge=1)
    drift_scale: float = Field(default=10.0, ge=0)
    calibration_slots: int = Field(default=100, ge=1)


class Scenario(_Strict):
    name: str = "scenario"
    description: str = ""
    seed: int = Field(default=0, ge=0, lt=2**64)
    output_dir: str = "runs/out"
    stack: StackSpec
    errors: ErrorSpec = ErrorSpec()
    scene: SceneSpec = SceneSpec()
    pilot: PilotSpec = PilotSpec()
    stages: StageSpec = StageSpec()
    gradient: GradientSpec = GradientSpec()
    calibration: CalibrationSpec = CalibrationSpec()
    codebook: Optional[CodebookSpec] = None
    sweep: Optional[SweepSpecModel] = None
    heatmap: HeatmapSpec = HeatmapSpec()
    monitor: Optional[MonitorSpec] = None

    # -- builders ---------------------------------------------------------

    @property
    def wavelength(self) -> float:
        return self.stack.resolved_wavelength()

    def stack_config(self) -> SimStackConfig:
        lam = self.wavelength
        s = self.stack
        return SimStackConfig(
            s.num_layers,
            s.atoms_per_side,
            lam,
            s.atom_pitch if s.atom_pitch is not None else lam / 2,
            s.stack_thickness,
            s.atom_area if s.atom_area is not None else (lam / 2) ** 2,
            s.spacing_mode,
        )

    def length_unit(self, unit: str) -> float:
        return self.wavelength if unit == "wavelength" else 1.0

    def error_bounds(self) -> ErrorBounds:
        u = self.length_unit(self.errors.unit)
        return ErrorBounds(self.errors.e_I * u, self.errors.e_V * u, math.radians(self.errors.e_P_deg))

    def explicit_errors(self) -> ErrorState | None:
        ex = self.errors.explicit
        if ex is None:
            return None
        u = self.length_unit(self.errors.unit)
        return ErrorState(
            np.asarray(ex.delta_spacing) * u, np.asarray(ex.delta_vertical) * u, np.radians(ex.delta_rotation_deg)
        )

    def scene_config(self, config: SimStackConfig | None = None) -> SceneConfig:
        config = config or self.stack_config()
        sc = self.scene
        ue = (
            np.asarray(sc.ue_position)
            if sc.ue_position is not None
            else ue_at(sc.ue_distance, math.radians(sc.ue_azimuth_deg), math.radians(sc.ue_elevation_deg))
        )
        rx = (
            np.asarray(sc.rx_positions)
            if sc.rx_positions is not None
            else default_rx_grid(config, sc.rx_side, sc.rx_standoff_wavelengths)
        )
        return SceneConfig(ue, rx, sc.model)

    def system(self) -> SimSystem:
        config = self.stack_config()
        return SimSystem(config, self.scene_config(config), self.calibration.unknown_w_out)

    def stage_plan(self) -> StagePlan:
        return StagePlan(self.stages.num_stages, self.stages.slots_per_stage, self.stages.mode)

    def gradient_settings(self) -> GradientSettings:
        return GradientSettings(**self.gradient.model_dump())

    def codebook_for(self, bounds: ErrorBounds) -> Codebook:
        cb = self.codebook or CodebookSpec()
        return Codebook.uniform(
            bounds,
            self.stack.num_layers,
            cb.points,
            refinement_factor=cb.refinement_factor,
            levels=cb.levels,
            max_sweeps=cb.max_sweeps,
        )

    @property
    def pilot_symbol(self) -> complex:
        return complex(*self.pilot.pilot_symbol)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def _format_loc(loc) -> str:
    out = ""
    for part in loc:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def parse_override(text: str) -> tuple[list[str], object]:
    """``a.b.c=value``; the value is read as JSON when possible, else as a string."""
    if "=" not in text:
        raise ScenarioError(text, "override must look like key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ScenarioError(text, "empty override key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def apply_overrides(doc: dict, overrides) -> dict:
    doc = copy.deepcopy(doc)
    for item in overrides or ():
        path, value = parse_override(item) if isinstance(item, str) else item
        node = doc
        for part in path[:-1]:
            nxt = node.get(part)
            if nxt is None:
                nxt = node[part] = {}
            if not isinstance(nxt, dict):
                raise ScenarioError(".".join(path), f"{part!r} is not a section")
            node = nxt
        node[path[-1]] = value
    return doc


def validate_document(doc: dict) -> Scenario:
    try:
        return Scenario.model_validate(doc)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ScenarioError(_format_loc(first["loc"]), first["msg"]) from None


BUNDLED = ("paper-fig4a", "paper-fig4b", "paper-fig5", "desk-tiny")


def bundled_scenarios() -> list[str]:
    return list(BUNDLED)


def bundled_path(name: str):
    return resources.files("simcal") / "scenarios" / f"{name}.json"


def read_document(source: str | Path) -> dict:
    """Load a scenario by file path or by bundled name."""
    text = None
    if str(source) in BUNDLED:
        text = bundled_path(str(source)).read_text()
    else:
        path = Path(source)
        if not path.is_file():
            raise ScenarioError("scenario", f"no such file or bundled scenario: {source}")
        text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("scenario", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("<root>", "scenario must be a JSON object")
    return doc


def load_scenario(source: str | Path, overrides=()) -> Scenario:
    return validate_document(apply_overrides(read_document(source), overrides))
