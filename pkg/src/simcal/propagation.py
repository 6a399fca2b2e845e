"""Interlayer propagation kernels and the cascaded end-to-end response."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, DimensionError, SingularityError
from .geometry import (
    ErrorState,
    LayerGeometry,
    SimStackConfig,
    apply_errors,
    build_ideal_geometry,
)

# Fraction of a wavelength below which the point-source kernels are refused.
MIN_DISTANCE_WAVELENGTHS = 0.01


class PropagationModel(str, enum.Enum):
    RAYLEIGH_SOMMERFELD = "RayleighSommerfeld"
    GEOMETRIC_RADAR = "GeometricRadar"


def _check_distance(d, wavelength):
    if np.any(d < MIN_DISTANCE_WAVELENGTHS * wavelength):
        raise SingularityError(
            f"propagation distance {np.min(d):.3e} m is below the {MIN_DISTANCE_WAVELENGTHS} wavelength guard"
        )


def _rs(d, cos_chi, wavelength, atom_area):
    return (atom_area * cos_chi / d) * (1.0 / (2 * np.pi * d) - 1j / wavelength) * np.exp(2j * np.pi * d / wavelength)


def _cosine_gain(cos_chi):
    return 4.0 * np.clip(cos_chi, 0.0, None)


def _radar(d, cos_t, cos_r, wavelength, atom_area):
    power = _cosine_gain(cos_t) * _cosine_gain(cos_r) * atom_area / (4 * np.pi * d**2)
    return np.sqrt(power) * np.exp(2j * np.pi * d / wavelength)


def rs_coefficient(src_pos, dst_pos, src_normal, wavelength, atom_area) -> complex:
    """Rayleigh-Sommerfeld point-source coefficient from ``src_pos`` to ``dst_pos``.

    ``w = (A cos(chi) / d) (1/(2 pi d) - j/lambda) exp(j 2 pi d / lambda)``
    where chi is measured from the source normal.
    """
    diff = np.asarray(dst_pos, float) - np.asarray(src_pos, float)
    d = float(np.linalg.norm(diff))
    if d == 0.0:
        raise SingularityError("source and destination coincide")
    _check_distance(d, wavelength)
    cos_chi = float(diff @ np.asarray(src_normal, float)) / d
    return complex(_rs(d, cos_chi, wavelength, atom_area))


def radar_coefficient(src_pos, dst_pos, src_normal, dst_normal, wavelength, atom_area) -> complex:
    """Geometric radar-equation coefficient with ``G(chi) = 4 cos(chi)`` patterns.

    ``dst_normal`` is the direction the receiving element faces, i.e. it
    should point back toward the source side.
    """
    diff = np.asarray(dst_pos, float) - np.asarray(src_pos, float)
    d = float(np.linalg.norm(diff))
    if d == 0.0:
        raise SingularityError("source and destination coincide")
    _check_distance(d, wavelength)
    cos_t = float(diff @ np.asarray(src_normal, float)) / d
    cos_r = float(-diff @ np.asarray(dst_normal, float)) / d
    return complex(_radar(d, cos_t, cos_r, wavelength, atom_area))


def _pairwise(src_pos, dst_pos):
    diff = dst_pos[:, None, :] - src_pos[None, :, :]
    d = np.sqrt(np.einsum("mnk,mnk->mn", diff, diff))
    return diff, d


def interlayer_matrix(
    src: LayerGeometry,
    dst: LayerGeometry,
    model: PropagationModel | str = PropagationModel.RAYLEIGH_SOMMERFELD,
    wavelength: float = 1.0,
    atom_area: float = 1.0,
) -> np.ndarray:
    """Entry (m, n) couples atom n of ``src`` to atom m of ``dst``."""
    model = PropagationModel(model)
    axial = (dst.atom_positions - src.center) @ src.normal
    if np.any(axial <= 0.0):
        raise SingularityError(f"layer {dst.layer_index} is not strictly downstream of layer {src.layer_index}")
    diff, d = _pairwise(src.atom_positions, dst.atom_positions)
    _check_distance(d, wavelength)
    cos_t = (diff @ src.normal) / d
    if model is PropagationModel.RAYLEIGH_SOMMERFELD:
        return _rs(d, cos_t, wavelength, atom_area)
    cos_r = (diff @ dst.normal) / d
    return _radar(d, cos_t, cos_r, wavelength, atom_area)


def ue_channel(ue_position, layer1: LayerGeometry, wavelength: float, atom_area: float) -> np.ndarray:
    """Free-space spherical-wave channel from the UE to every layer-1 atom, shape (M^2,)."""
    diff = layer1.atom_positions - np.asarray(ue_position, float)[None, :]
    d = np.linalg.norm(diff, axis=1)
    cos_chi = (diff @ layer1.normal) / d
    if np.any(cos_chi <= 0.0):
        raise ConfigurationError("UE must be strictly in front of layer 1")
    _check_distance(d, wavelength)
    return wavelength / (4 * np.pi * d) * np.sqrt(atom_area * cos_chi) * np.exp(2j * np.pi * d / wavelength)


def exit_matrix(layer_last: LayerGeometry, rx_positions, wavelength: float, atom_area: float) -> np.ndarray:
    """RS coefficients from each last-layer atom to each receive probe, shape (N_rx, M^2)."""
    rx = np.atleast_2d(np.asarray(rx_positions, float))
    axial = (rx - layer_last.center) @ layer_last.normal
    if np.any(axial <= 0.0):
        raise ConfigurationError("receive probes must lie strictly behind the last layer")
    diff, d = _pairwise(layer_last.atom_positions, rx)
    _check_distance(d, wavelength)
    return _rs(d, (diff @ layer_last.normal) / d, wavelength, atom_area)


@dataclass(frozen=True)
class PropagationSet:
    """UE channel ``h``, interlayer matrices ``W_1..W_{L-1}`` and exit matrix ``w_out``."""

    h: np.ndarray
    interlayer: tuple[np.ndarray, ...]
    w_out: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "interlayer", tuple(self.interlayer))

    @property
    def num_layers(self) -> int:
        return len(self.interlayer) + 1

    @property
    def names(self) -> list[str]:
        return ["h"] + [f"W{l + 1}" for l in range(len(self.interlayer))] + ["W_out"]

    def matrices(self) -> dict[str, np.ndarray]:
        return dict(zip(self.names, [self.h, *self.interlayer, self.w_out]))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.matrices()[name]

    def replace(self, **updates: np.ndarray) -> PropagationSet:
        mats = self.matrices()
        for k, v in updates.items():
            if k not in mats:
                raise KeyError(k)
            mats[k] = v
        return PropagationSet(mats["h"], [mats[n] for n in self.names[1:-1]], mats["W_out"])

    def copy(self) -> PropagationSet:
        return PropagationSet(self.h.copy(), [w.copy() for w in self.interlayer], self.w_out.copy())

    def check_dimensions(self):
        n = self.h.shape[0]
        if self.h.ndim != 1:
            raise DimensionError("stage h: channel must be a vector")
        for name, w in zip(self.names[1:-1], self.interlayer):
            if w.shape != (n, n):
                raise DimensionError(f"stage {name}: expected {(n, n)}, got {w.shape}")
        if self.w_out.ndim != 2 or self.w_out.shape[1] != n:
            raise DimensionError(f"stage W_out: expected (N_rx, {n}), got {self.w_out.shape}")


def cascade_response(pset: PropagationSet, phases: np.ndarray) -> np.ndarray:
    """End-to-end response ``W_out Phi_L W_{L-1} ... W_1 Phi_1 h``.

    ``phases`` has shape (L, N) for one configuration (returns (N_rx,)) or
    (T, L, N) for a schedule (returns (T, N_rx)).
    """
    phases = np.asarray(phases, float)
    single = phases.ndim == 2
    if single:
        phases = phases[None]
    pset.check_dimensions()
    if phases.shape[1:] != (pset.num_layers, pset.h.shape[0]):
        raise DimensionError(
            f"stage phases: expected (*, {pset.num_layers}, {pset.h.shape[0]}), got {phases.shape}"
        )
    x = pset.h[None, :] * np.exp(1j * phases[:, 0])
    for l, w in enumerate(pset.interlayer, start=1):
        x = (x @ w.T) * np.exp(1j * phases[:, l])
    y = x @ pset.w_out.T
    return y[0] if single else y


@dataclass(frozen=True)
class SceneConfig:
    ue_position: np.ndarray
    rx_positions: np.ndarray
    model: PropagationModel = PropagationModel.RAYLEIGH_SOMMERFELD

    def __post_init__(self):
        object.__setattr__(self, "ue_position", np.asarray(self.ue_position, float))
        object.__setattr__(self, "rx_positions", np.atleast_2d(np.asarray(self.rx_positions, float)))
        object.__setattr__(self, "model", PropagationModel(self.model))


def default_rx_grid(config: SimStackConfig, side: int = 2, standoff_wavelengths: float = 5.0) -> np.ndarray:
    """Square probe grid at half-wavelength pitch, on axis, behind the last layer."""
    lam = config.wavelength
    offs = (np.arange(side) - (side - 1) / 2.0) * lam / 2
    zz, xx = np.meshgrid(offs, offs, indexing="ij")
    y = config.stack_thickness + standoff_wavelengths * lam
    return np.column_stack([xx.ravel(), np.full(side * side, y), zz.ravel()])


def ue_at(distance: float, azimuth: float, elevation: float) -> np.ndarray:
    """UE position in front of the stack; angles (radians) measured from the -y axis."""
    return distance * np.array(
        [math.sin(azimuth) * math.cos(elevation), -math.cos(azimuth) * math.cos(elevation), math.sin(elevation)]
    )


@dataclass(frozen=True)
class SimSystem:
    """Stack + scene; maps an :class:`ErrorState` to its propagation set."""

    config: SimStackConfig
    scene: SceneConfig
    unknown_w_out: bool = False
    ideal_geometry: list[LayerGeometry] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ideal_geometry", build_ideal_geometry(self.config))
        if self.scene.ue_position[1] >= 0.0:
            raise ConfigurationError("UE must be strictly in front of layer 1 (y < 0)")

    def geometry(self, errors: ErrorState | None = None) -> list[LayerGeometry]:
        if errors is None:
            return self.ideal_geometry
        return apply_errors(self.ideal_geometry, errors, self.config.spacing_mode)

    def propagation_set(self, errors: ErrorState | None = None) -> PropagationSet:
        cfg = self.config
        layers = self.geometry(errors)
        h = ue_channel(self.scene.ue_position, layers[0], cfg.wavelength, cfg.atom_area)
        ws = [
            interlayer_matrix(a, b, self.scene.model, cfg.wavelength, cfg.atom_area)
            for a, b in zip(layers[:-1], layers[1:])
        ]
        # receiver array is factory-calibrated: exit matrix always uses ideal last-layer geometry
        # unless it is itself an unknown
        last = layers[-1] if self.unknown_w_out else self.ideal_geometry[-1]
        w_out = exit_matrix(last, self.scene.rx_positions, cfg.wavelength, cfg.atom_area)
        return PropagationSet(h, ws, w_out)

    @cached_property
    def ideal_set(self) -> PropagationSet:
        return self.propagation_set(None)

    @property
    def unknown_names(self) -> list[str]:
        names = self.ideal_set.names
        return names if self.unknown_w_out else names[:-1]
