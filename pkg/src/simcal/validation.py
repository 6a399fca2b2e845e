"""Self-checks run by ``simcal validate``: independent oracles against the fast paths."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from . import seeding
from .calibration import pilot_loss, pilot_loss_gradient
from .geometry import ErrorBounds, ErrorState, SimStackConfig, apply_errors, build_ideal_geometry, sample_errors
from .measurement import PilotPlan, generate_phase_schedule, measure
from .propagation import (
    PropagationModel,
    PropagationSet,
    SimSystem,
    cascade_response,
    interlayer_matrix,
    radar_coefficient,
    rs_coefficient,
)
from .scenario import BUNDLED, ScenarioError, bundled_path, validate_document


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def finite_difference_gradient(candidate: PropagationSet, meas, name: str, step: float) -> np.ndarray:
    """Central differences of the loss, folded into ``df/d conj(W) = (df/dRe + i df/dIm) / 2``."""
    base = candidate[name]
    out = np.empty(base.shape, complex)
    for idx in np.ndindex(base.shape):
        parts = []
        for unit in (1.0, 1j):
            plus, minus = base.copy(), base.copy()
            plus[idx] += unit * step
            minus[idx] -= unit * step
            fp = pilot_loss(candidate.replace(**{name: plus}), meas)
            fm = pilot_loss(candidate.replace(**{name: minus}), meas)
            parts.append((fp - fm) / (2 * step))
        out[idx] = 0.5 * (parts[0] + 1j * parts[1])
    return out


def gradient_trial(system: SimSystem, seed: int, num_slots: int = 20, rel_step: float = 1e-6) -> float:
    """Worst per-entry relative error between adjoint and finite-difference gradients."""
    rng = np.random.default_rng(seed)
    cfg = system.config
    bounds = ErrorBounds(0.01 * cfg.wavelength, 0.1 * cfg.wavelength, np.radians(0.1))
    truth = system.propagation_set(sample_errors(bounds, int(rng.integers(2**63)), cfg.num_layers))
    plan = PilotPlan(num_slots, phase_seed=int(rng.integers(2**63)))
    meas = measure(truth, generate_phase_schedule(cfg, plan), plan, 0)
    ideal = system.ideal_set

    def jitter(w):
        noise = rng.standard_normal(w.shape) + 1j * rng.standard_normal(w.shape)
        return w + 0.1 * np.sqrt(np.mean(np.abs(w) ** 2)) * noise

    candidate = ideal.replace(**{n: jitter(ideal[n]) for n in ideal.names})
    analytic = pilot_loss_gradient(candidate, meas)
    worst = 0.0
    for name in candidate.names:
        step = rel_step * float(np.sqrt(np.mean(np.abs(candidate[name]) ** 2)))
        fd = finite_difference_gradient(candidate, meas, name, step)
        rel = np.abs(fd - analytic[name]) / np.abs(analytic[name])
        worst = max(worst, float(rel.max()))
    return worst


def brute_interlayer(src, dst, model, wavelength, atom_area) -> np.ndarray:
    n_dst, n_src = len(dst.atom_positions), len(src.atom_positions)
    out = np.empty((n_dst, n_src), complex)
    for m in range(n_dst):
        for n in range(n_src):
            if PropagationModel(model) is PropagationModel.RAYLEIGH_SOMMERFELD:
                out[m, n] = rs_coefficient(src.atom_positions[n], dst.atom_positions[m], src.normal, wavelength, atom_area)
            else:
                out[m, n] = radar_coefficient(
                    src.atom_positions[n], dst.atom_positions[m], src.normal, -dst.normal, wavelength, atom_area
                )
    return out


def path_sum_response(pset: PropagationSet, phases: np.ndarray) -> np.ndarray:
    """Sum over every atom path through the stack, one scalar product per path."""
    n = pset.h.shape[0]
    num_layers = pset.num_layers
    out = np.zeros(pset.w_out.shape[0], complex)
    for r in range(pset.w_out.shape[0]):
        total = 0j
        for path in itertools.product(range(n), repeat=num_layers):
            term = pset.h[path[0]] * np.exp(1j * phases[0, path[0]])
            for l in range(1, num_layers):
                term *= pset.interlayer[l - 1][path[l], path[l - 1]] * np.exp(1j * phases[l, path[l]])
            total += pset.w_out[r, path[-1]] * term
        out[r] = total
    return out


def _rel(a, b) -> float:
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def oracle_trial(seed: int) -> tuple[float, float]:
    """Random small stack: (interlayer vs loop, cascade vs path sum) relative errors."""
    rng = np.random.default_rng(seed)
    num_layers, side = int(rng.integers(2, 4)), int(rng.integers(1, 4))
    lam = 0.0107
    cfg = SimStackConfig(num_layers, side, lam, lam / 2, float(rng.uniform(0.5, 3.0)) * lam * (num_layers - 1), (lam / 2) ** 2)
    bounds = ErrorBounds(0.01 * lam, 0.1 * lam, np.radians(1.0))
    layers = apply_errors(build_ideal_geometry(cfg), sample_errors(bounds, int(rng.integers(2**63)), num_layers))
    worst_w = 0.0
    mats = []
    for model in PropagationModel:
        for a, b in zip(layers, layers[1:]):
            fast = interlayer_matrix(a, b, model, lam, cfg.atom_area)
            worst_w = max(worst_w, _rel(fast, brute_interlayer(a, b, model, lam, cfg.atom_area)))
            if model is PropagationModel.RAYLEIGH_SOMMERFELD:
                mats.append(fast)
    n = cfg.atoms_per_layer
    h = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    w_out = rng.standard_normal((3, n)) + 1j * rng.standard_normal((3, n))
    pset = PropagationSet(h, mats, w_out)
    phases = rng.uniform(0, 2 * np.pi, (num_layers, n))
    return worst_w, _rel(cascade_response(pset, phases), path_sum_response(pset, phases))


def zero_error_identity(system: SimSystem) -> bool:
    ideal = system.ideal_set
    zero = system.propagation_set(ErrorState.zeros(system.config.num_layers))
    return all(np.array_equal(ideal[n], zero[n]) for n in ideal.names)


def schema_check() -> list[str]:
    bad = []
    for name in BUNDLED:
        try:
            validate_document(json.loads(bundled_path(name).read_text()))
        except ScenarioError as exc:
            bad.append(f"{name}: {exc}")
    return bad


def run_checks(system: SimSystem, master_seed: int = 0, gradient_trials: int = 100, oracle_trials: int = 20) -> list[CheckResult]:
    results = []
    bad = schema_check()
    results.append(CheckResult("bundled_schema", not bad, "; ".join(bad) or f"{len(BUNDLED)} files valid"))

    worst = max(gradient_trial(system, seeding.derive_seed(master_seed, 7, t)) for t in range(gradient_trials))
    results.append(CheckResult("adjoint_gradient", worst < 1e-5, f"max relative error {worst:.3e} over {gradient_trials} trials"))

    errs = [oracle_trial(seeding.derive_seed(master_seed, 8, t)) for t in range(oracle_trials)]
    w_err = max(e[0] for e in errs)
    c_err = max(e[1] for e in errs)
    results.append(CheckResult("interlayer_oracle", w_err <= 1e-12, f"max relative error {w_err:.3e}"))
    results.append(CheckResult("cascade_path_sum", c_err <= 1e-12, f"max relative error {c_err:.3e}"))

    ok = zero_error_identity(system)
    results.append(CheckResult("zero_error_identity", ok, "bitwise" if ok else "ideal and zero-error sets differ"))
    return results
