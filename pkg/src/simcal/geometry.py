"""SIM stack geometry and rigid-layer fabrication errors.

Axis convention: waves travel along +y, layers lie in x-z planes, and the
vertical in-plane axis is z.  All lengths are meters, all angles radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, DimensionError

PROPAGATION_AXIS = np.array([0.0, 1.0, 0.0])
SPEED_OF_LIGHT = 299_792_458.0

SPACING_CUMULATIVE = "cumulative"
SPACING_INDEPENDENT = "independent"


@dataclass(frozen=True)
class SimStackConfig:
    num_layers: int
    atoms_per_side: int
    wavelength: float
    atom_pitch: float
    stack_thickness: float
    atom_area: float
    spacing_mode: str = SPACING_CUMULATIVE

    def __post_init__(self):
        checks = [
            ("num_layers", self.num_layers >= 2, "must be >= 2"),
            ("atoms_per_side", self.atoms_per_side >= 1, "must be >= 1"),
            ("wavelength", self.wavelength > 0, "must be > 0"),
            ("atom_pitch", self.atom_pitch > 0, "must be > 0"),
            ("stack_thickness", self.stack_thickness > 0, "must be > 0"),
            ("atom_area", self.atom_area > 0, "must be > 0"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigurationError(f"{name} {msg} (got {getattr(self, name)!r})")
        for name in ("wavelength", "atom_pitch", "stack_thickness", "atom_area"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite")
        if self.spacing_mode not in (SPACING_CUMULATIVE, SPACING_INDEPENDENT):
            raise ConfigurationError(f"spacing_mode must be 'cumulative' or 'independent', got {self.spacing_mode!r}")

    @classmethod
    def from_frequency(cls, num_layers, atoms_per_side, frequency_hz, stack_thickness, **kw):
        """Half-wavelength pitch and (lambda/2)^2 atom area unless given."""
        wavelength = SPEED_OF_LIGHT / frequency_hz
        kw.setdefault("atom_pitch", wavelength / 2)
        kw.setdefault("atom_area", (wavelength / 2) ** 2)
        return cls(num_layers, atoms_per_side, wavelength, stack_thickness=stack_thickness, **kw)

    @property
    def atoms_per_layer(self) -> int:
        return self.atoms_per_side**2

    @property
    def nominal_gap(self) -> float:
        return self.stack_thickness / (self.num_layers - 1)


@dataclass(frozen=True)
class ErrorBounds:
    e_I: float = 0.0
    e_V: float = 0.0
    e_P: float = 0.0

    def __post_init__(self):
        for name in ("e_I", "e_V", "e_P"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigurationError(f"{name} must be finite and >= 0 (got {v!r})")

    def scaled(self, factor: float) -> ErrorBounds:
        return ErrorBounds(self.e_I * factor, self.e_V * factor, self.e_P * factor)


@dataclass(frozen=True)
class ErrorState:
    """Per-layer error triple; ``delta_spacing[0]`` is always zero."""

    delta_spacing: np.ndarray
    delta_vertical: np.ndarray
    delta_rotation: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(a, dtype=float).copy() for a in (self.delta_spacing, self.delta_vertical, self.delta_rotation)]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1:
            raise DimensionError("error components must be 1-D arrays of equal length")
        if not all(np.all(np.isfinite(a)) for a in arrs):
            raise ConfigurationError("error components must be finite")
        if arrs[0].size and arrs[0][0] != 0.0:
            raise ConfigurationError("delta_spacing of layer 1 must be 0")
        for a in arrs:
            a.flags.writeable = False
        object.__setattr__(self, "delta_spacing", arrs[0])
        object.__setattr__(self, "delta_vertical", arrs[1])
        object.__setattr__(self, "delta_rotation", arrs[2])

    @classmethod
    def zeros(cls, num_layers: int) -> ErrorState:
        z = np.zeros(num_layers)
        return cls(z, z, z)

    @classmethod
    def from_array(cls, params: np.ndarray) -> ErrorState:
        """Inverse of :meth:`as_array` (rows are layers, columns I/V/P)."""
        params = np.asarray(params, dtype=float)
        return cls(params[:, 0], params[:, 1], params[:, 2])

    @property
    def num_layers(self) -> int:
        return self.delta_spacing.size

    def as_array(self) -> np.ndarray:
        return np.stack([self.delta_spacing, self.delta_vertical, self.delta_rotation], axis=1)

    def to_dict(self) -> dict:
        return {
            "delta_spacing": self.delta_spacing.tolist(),
            "delta_vertical": self.delta_vertical.tolist(),
            "delta_rotation": self.delta_rotation.tolist(),
        }

    def __eq__(self, other):
        if not isinstance(other, ErrorState):
            return NotImplemented
        return np.array_equal(self.as_array(), other.as_array())

    __hash__ = None


@dataclass(frozen=True)
class LayerGeometry:
    layer_index: int
    atom_positions: np.ndarray  # (M^2, 3), row index n = iz * M + ix
    normal: np.ndarray = field(default_factory=lambda: PROPAGATION_AXIS.copy())

    @property
    def plane_coordinate(self) -> float:
        return float(self.atom_positions[0, 1])

    @property
    def center(self) -> np.ndarray:
        return self.atom_positions.mean(axis=0)


def _grid_offsets(m: int, pitch: float) -> np.ndarray:
    return (np.arange(m) - (m - 1) / 2.0) * pitch


def build_ideal_geometry(config: SimStackConfig) -> list[LayerGeometry]:
    m = config.atoms_per_side
    offs = _grid_offsets(m, config.atom_pitch)
    zz, xx = np.meshgrid(offs, offs, indexing="ij")
    layers = []
    for l in range(config.num_layers):
        y = l * config.stack_thickness / (config.num_layers - 1)
        pos = np.column_stack([xx.ravel(), np.full(m * m, y), zz.ravel()])
        layers.append(LayerGeometry(l + 1, pos))
    return layers


def sample_errors(bounds: ErrorBounds, rng_seed: int, num_layers: int) -> ErrorState:
    rng = np.random.default_rng(rng_seed)
    spacing = rng.uniform(-bounds.e_I, bounds.e_I, num_layers)
    vertical = rng.uniform(-bounds.e_V, bounds.e_V, num_layers)
    rotation = rng.uniform(-bounds.e_P, bounds.e_P, num_layers)
    spacing[0] = 0.0
    return ErrorState(spacing, vertical, rotation)


def rotate_in_plane(points: np.ndarray, angle: float, center: np.ndarray) -> np.ndarray:
    """Rotate points about ``center`` within the x-z plane."""
    c, s = math.cos(angle), math.sin(angle)
    dx = points[:, 0] - center[0]
    dz = points[:, 2] - center[2]
    out = points.copy()
    out[:, 0] = center[0] + c * dx - s * dz
    out[:, 2] = center[2] + s * dx + c * dz
    return out


def apply_errors(
    ideal: list[LayerGeometry], errors: ErrorState, spacing_mode: str = SPACING_CUMULATIVE
) -> list[LayerGeometry]:
    """Realize the practical stack.

    In cumulative mode a spacing deviation moves its layer and every layer
    behind it; in independent mode each layer moves alone.
    """
    if len(ideal) != errors.num_layers:
        raise DimensionError(f"geometry has {len(ideal)} layers but error state has {errors.num_layers}")
    if spacing_mode == SPACING_CUMULATIVE:
        axial = np.cumsum(errors.delta_spacing)
    elif spacing_mode == SPACING_INDEPENDENT:
        axial = errors.delta_spacing
    else:
        raise ConfigurationError(f"unknown spacing_mode {spacing_mode!r}")

    out = []
    for layer, dy, dz, rot in zip(ideal, axial, errors.delta_vertical, errors.delta_rotation):
        pos = layer.atom_positions.copy()
        pos[:, 1] += dy
        pos[:, 2] += dz
        # rotation by exactly 0 is skipped so the zero state is a bitwise identity
        if rot != 0.0:
            pos = rotate_in_plane(pos, float(rot), pos.mean(axis=0))
        out.append(replace(layer, atom_positions=pos, normal=layer.normal.copy()))
    return out
