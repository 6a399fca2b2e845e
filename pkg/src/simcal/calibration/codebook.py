"""Hierarchical codebook calibration over the parametric error family.

Each codeword is an :class:`ErrorState`; its propagation matrices are rebuilt
from geometry, so the search never leaves the physically realizable set.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, EmptyInputError
from ..geometry import ErrorBounds, ErrorState
from ..measurement import MeasurementSet
from ..propagation import PropagationSet, SimSystem
from .objective import pilot_loss


@dataclass(frozen=True)
class Codebook:
    """Coarse per-layer grids plus the refinement schedule.

    ``grids`` has shape (L, 3, K): for every layer, K candidate values of
    spacing, vertical offset and rotation.
    """

    grids: np.ndarray
    refinement_factor: float = 2.0
    levels: int = 1
    max_sweeps: int = 4

    def __post_init__(self):
        grids = np.asarray(self.grids, dtype=float)
        if grids.ndim != 3 or grids.shape[1] != 3 or grids.shape[2] == 0:
            raise EmptyInputError(f"codebook grids must have shape (L, 3, K>0), got {grids.shape}")
        if not np.all(np.isfinite(grids)):
            raise ConfigurationError("codebook grids must be finite")
        for row in grids.reshape(-1, grids.shape[2]):
            if not np.any(row == 0.0):
                raise ConfigurationError("every codebook grid must contain 0")
            if not np.allclose(np.sort(row), np.sort(-row), rtol=0, atol=1e-15 + 1e-12 * np.abs(row).max()):
                raise ConfigurationError("codebook grids must be symmetric about 0")
        if self.refinement_factor <= 1:
            raise ConfigurationError("refinement_factor must be > 1")
        if self.levels < 0 or self.max_sweeps < 1:
            raise ConfigurationError("levels must be >= 0 and max_sweeps >= 1")
        object.__setattr__(self, "grids", grids)

    @classmethod
    def uniform(cls, bounds: ErrorBounds, num_layers: int, points: int = 3, **kw) -> Codebook:
        if points < 1 or points % 2 == 0:
            raise ConfigurationError("points per axis must be odd and >= 1")
        unit = np.linspace(-1.0, 1.0, points) if points > 1 else np.zeros(1)
        grids = np.empty((num_layers, 3, points))
        for col, bound in enumerate((bounds.e_I, bounds.e_V, bounds.e_P)):
            grids[:, col, :] = unit * bound
        grids[0, 0, :] = 0.0
        return cls(grids, **kw)

    @property
    def num_layers(self) -> int:
        return self.grids.shape[0]

    def coarse_step(self) -> np.ndarray:
        """(L, 3) spacing between neighbouring coarse values (0 where frozen)."""
        half = (self.grids.shape[2] - 1) // 2
        if half == 0:
            return np.zeros(self.grids.shape[:2])
        return np.abs(self.grids).max(axis=2) / half


@dataclass
class CodebookResult:
    errors: ErrorState
    estimate: PropagationSet
    loss: float
    coarse_errors: ErrorState
    coarse_loss: float
    evaluations: int
    history: list[tuple[int, int, float]] = field(default_factory=list)  # (level, layer, loss)


def codebook_search(system: SimSystem, measurements: MeasurementSet, codebook: Codebook) -> CodebookResult:
    """Coarse layer-by-layer coordinate descent, then ``levels`` rounds of local refinement.

    Ties on loss go to the smaller normalized parameter vector; layers are
    visited from the lowest index.
    """
    num_layers = system.config.num_layers
    if codebook.num_layers != num_layers:
        raise ConfigurationError(f"codebook covers {codebook.num_layers} layers, system has {num_layers}")
    norm_scale = np.abs(codebook.grids).max(axis=(0, 2))
    norm_scale[norm_scale == 0] = 1.0
    cache: dict[bytes, float] = {}

    def score(params: np.ndarray) -> float:
        key = params.tobytes()
        if key not in cache:
            cache[key] = pilot_loss(system.propagation_set(ErrorState.from_array(params)), measurements)
        return cache[key]

    def rank(params):
        return (score(params), float(np.sum((params / norm_scale) ** 2)))

    def descend(params, axis_values, level, history):
        best = rank(params)
        for _ in range(codebook.max_sweeps):
            changed = False
            for layer in range(num_layers):
                for triple in itertools.product(*axis_values(params, layer)):
                    cand = params.copy()
                    cand[layer] = triple
                    r = rank(cand)
                    if r < best:
                        best, params, changed = r, cand, True
                history.append((level, layer + 1, best[0]))
            if not changed:
                break
        return params

    history: list = []
    params = np.zeros((num_layers, 3))
    params = descend(params, lambda p, l: codebook.grids[l], 0, history)
    coarse = params.copy()

    steps = codebook.coarse_step()
    half = (codebook.grids.shape[2] - 1) // 2
    offsets = np.arange(-half, half + 1)
    for level in range(1, codebook.levels + 1):
        shrink = codebook.refinement_factor**level

        def local(p, l, shrink=shrink):
            vals = []
            for col in range(3):
                if steps[l, col] == 0.0:
                    vals.append([p[l, col]])
                else:
                    vals.append(p[l, col] + offsets * (steps[l, col] / shrink))
            return vals

        params = descend(params, local, level, history)

    errors = ErrorState.from_array(params)
    return CodebookResult(
        errors,
        system.propagation_set(errors),
        score(params),
        ErrorState.from_array(coarse),
        score(coarse),
        len(cache),
        history,
    )
