"""Gradient-based calibration of the propagation matrices.

Updates run in whitened coordinates ``X = W / sigma`` where ``sigma`` is an
entrywise prior standard deviation (see :func:`prior_scales`), which is a
diagonal preconditioner on the raw complex gradient.  Steps start from the
normalized trial ``step_size * ||W|| / ||grad||`` and then follow
Barzilai-Borwein lengths with an Armijo backtracking guard, so every
accepted iterate lowers the objective.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigurationError
from ..geometry import ErrorBounds, ErrorState
from ..measurement import MeasurementSet
from ..propagation import PropagationSet, SimSystem
from .objective import pilot_loss_and_gradient

log = logging.getLogger(__name__)

EPS = 1e-12
ARMIJO = 1e-4
MAX_BACKTRACKS = 60
DIVERGENCE_FACTOR = 10.0


@dataclass(frozen=True)
class GradientSettings:
    step_size: float = 0.05
    stage_decay: float = 0.8
    max_iters_per_stage: int = 200
    regularization_weight: float = 0.0
    convergence_tol: float = 1e-8
    preconditioner: str = "prior"  # "prior" | "block"
    prior_ridge: float = 1e-3

    def __post_init__(self):
        if not self.step_size > 0:
            raise ConfigurationError("step_size must be > 0")
        if not 0 < self.stage_decay <= 1:
            raise ConfigurationError("stage_decay must lie in (0, 1]")
        if self.max_iters_per_stage < 0:
            raise ConfigurationError("max_iters_per_stage must be >= 0")
        if self.regularization_weight < 0:
            raise ConfigurationError("regularization_weight must be >= 0")
        if not self.convergence_tol > 0:
            raise ConfigurationError("convergence_tol must be > 0")
        if self.preconditioner not in ("prior", "block"):
            raise ConfigurationError("preconditioner must be 'prior' or 'block'")

    def for_stage(self, stage: int) -> GradientSettings:
        """Settings for 1-based ``stage`` with the decayed step."""
        from dataclasses import replace

        return replace(self, step_size=self.step_size * self.stage_decay ** (stage - 1))

    def to_dict(self):
        return asdict(self)


@dataclass
class StageResult:
    estimate: PropagationSet
    loss_history: list[float]  # best-so-far objective, one entry per accepted iterate
    initial_loss: float
    status: str
    step_size: float

    @property
    def final_loss(self) -> float:
        return self.loss_history[-1]


def block_scales(pset: PropagationSet, names) -> dict[str, np.ndarray]:
    return {n: np.full(pset[n].shape, np.linalg.norm(pset[n])) for n in names}


def prior_scales(system: SimSystem, bounds: ErrorBounds, ridge: float = 1e-3, names=None) -> dict[str, np.ndarray]:
    """Entrywise prior standard deviation of every unknown matrix.

    Linearizes the geometry-to-matrix map around the ideal stack (one
    forward difference per layer and error type) and propagates the
    variance ``bound**2 / 3`` of each uniform error.  ``ridge`` adds a
    fraction of the block-mean variance so no entry is frozen.  Falls
    back to :func:`block_scales` when every bound is zero.
    """
    names = list(names or system.unknown_names)
    ideal = system.ideal_set
    num_layers = system.config.num_layers
    var = {n: np.zeros(ideal[n].shape) for n in names}
    any_bound = False
    for layer in range(num_layers):
        for col, bound in enumerate((bounds.e_I, bounds.e_V, bounds.e_P)):
            if bound == 0.0 or (col == 0 and layer == 0):
                continue
            any_bound = True
            probe = 1e-3 * bound
            params = np.zeros((num_layers, 3))
            params[layer, col] = probe
            moved = system.propagation_set(ErrorState.from_array(params))
            for n in names:
                var[n] += np.abs((moved[n] - ideal[n]) / probe) ** 2 * (bound**2 / 3.0)
    if not any_bound:
        return block_scales(ideal, names)
    out = {}
    for n in names:
        floor = ridge * var[n].mean()
        if floor == 0.0:
            floor = (np.linalg.norm(ideal[n]) ** 2 / ideal[n].size) * 1e-12
        out[n] = np.sqrt(var[n] + floor)
    return out


def _inner(a: dict, b: dict) -> float:
    return sum(float(np.vdot(a[k], b[k]).real) for k in a)


def run_gradient_stage(
    initial: PropagationSet,
    measurements: MeasurementSet,
    settings: GradientSettings,
    *,
    unknowns=None,
    scales: dict[str, np.ndarray] | None = None,
    reference: PropagationSet | None = None,
) -> StageResult:
    """Descend the pilot loss from ``initial``; returns the best iterate seen.

    ``reference`` is the set the optional regularizer pulls toward (the
    ideal model); it defaults to ``initial``.
    """
    names = list(unknowns or initial.names[:-1])
    scales = scales or block_scales(initial, names)
    reference = reference or initial
    lam = settings.regularization_weight
    ref_norm = {n: max(np.vdot(reference[n], reference[n]).real, EPS) for n in names}

    def objective(pset):
        loss, grads = pilot_loss_and_gradient(pset, measurements)
        g = {n: grads[n] for n in names}
        if lam > 0:
            for n in names:
                d = pset[n] - reference[n]
                loss += lam * np.vdot(d, d).real / ref_norm[n]
                g[n] = g[n] + lam * d / ref_norm[n]
        # chain rule into whitened coordinates
        return loss, {n: scales[n] * g[n] for n in names}

    cur = initial
    f, gx = objective(cur)
    initial_loss = f
    history = [f]
    best, best_f = cur, f
    status = "max_iters"

    gnorm2 = _inner(gx, gx)
    if f == 0.0 or gnorm2 == 0.0:
        return StageResult(cur, history, initial_loss, "converged", settings.step_size)

    w_norm = math.sqrt(sum(np.vdot(initial[n], initial[n]).real for n in names))
    dw_norm = math.sqrt(sum(np.vdot(scales[n] * gx[n], scales[n] * gx[n]).real for n in names))
    alpha = settings.step_size * w_norm / (dw_norm + EPS)

    for _ in range(settings.max_iters_per_stage):
        for _ in range(MAX_BACKTRACKS):
            cand = cur.replace(**{n: cur[n] - alpha * scales[n] * gx[n] for n in names})
            fc, gc = objective(cand)
            if np.isfinite(fc) and fc <= f - ARMIJO * 2 * alpha * gnorm2:
                break
            alpha *= 0.5
        else:
            status = "stalled"
            break
        if fc > DIVERGENCE_FACTOR * initial_loss:
            log.warning("gradient stage diverged: loss %.3e > %g x initial %.3e", fc, DIVERGENCE_FACTOR, initial_loss)
            status = "diverged"
            break
        step = {n: -alpha * gx[n] for n in names}
        dg = {n: gc[n] - gx[n] for n in names}
        sy = _inner(step, dg)
        rel = (f - fc) / f
        cur, f, gx = cand, fc, gc
        gnorm2 = _inner(gx, gx)
        if f < best_f:
            best, best_f = cur, f
        history.append(best_f)
        if rel < settings.convergence_tol or f == 0.0 or gnorm2 == 0.0:
            status = "converged"
            break
        alpha = _inner(step, step) / sy if sy > 0 else 2 * alpha
    return StageResult(best, history, initial_loss, status, settings.step_size)
