import numpy as np

from simcal.geometry import ErrorBounds, sample_errors
from simcal.measurement import PilotPlan, generate_phase_schedule, measure


def pilots(system, practical, num_slots=40, seed=0, snr_db="noiseless"):
    plan = PilotPlan(num_slots, phase_seed=seed, snr_db=snr_db)
    return measure(practical, generate_phase_schedule(system.config, plan), plan, seed + 1)


def perturbed(system, seed, scale=1.0):
    lam = system.config.wavelength
    bounds = ErrorBounds(0.001 * lam * scale, 0.01 * lam * scale, np.radians(0.01 * scale))
    errors = sample_errors(bounds, seed, system.config.num_layers)
    return errors, system.propagation_set(errors)


def jittered(pset, rng, rel=0.1):
    def j(w):
        noise = rng.standard_normal(w.shape) + 1j * rng.standard_normal(w.shape)
        return w + rel * np.sqrt(np.mean(np.abs(w) ** 2)) * noise

    return pset.replace(**{n: j(pset[n]) for n in pset.names})
