import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simcal.errors import ConfigurationError, DimensionError
from simcal.geometry import ErrorBounds, SimStackConfig, sample_errors
from simcal.measurement import MeasurementSet, PilotPlan, generate_phase_schedule, measure
from simcal.propagation import cascade_response


@pytest.fixture(scope="module")
def practical(tiny_system):
    return tiny_system.propagation_set(sample_errors(ErrorBounds(1e-5, 1e-4, 1e-3), 3, 2))


def test_schedule_deterministic_and_seed_sensitive(tiny_system):
    cfg = tiny_system.config
    a = generate_phase_schedule(cfg, PilotPlan(50, phase_seed=1))
    assert a.shape == (50, 2, 4)
    assert np.array_equal(a, generate_phase_schedule(cfg, PilotPlan(50, phase_seed=1)))
    assert not np.array_equal(a, generate_phase_schedule(cfg, PilotPlan(50, phase_seed=2)))


def test_schedule_histogram_is_flat():
    cfg = SimStackConfig.from_frequency(4, 6, 28e9, 0.01)
    ph = generate_phase_schedule(cfg, PilotPlan(1000, phase_seed=8)).ravel()
    assert ph.min() >= 0 and ph.max() < 2 * np.pi
    counts, _ = np.histogram(ph, bins=8, range=(0, 2 * np.pi))
    expected = ph.size / 8
    assert np.all(np.abs(counts - expected) <= 0.05 * expected)


def test_noiseless_single_slot_is_exact(tiny_system, practical):
    plan = PilotPlan(1, phase_seed=3)
    sched = generate_phase_schedule(tiny_system.config, plan)
    meas = measure(practical, sched, plan, noise_seed=0)
    assert np.array_equal(meas.y[0], cascade_response(practical, sched[0]))


def test_infinite_snr_is_noiseless(tiny_system, practical):
    sched = generate_phase_schedule(tiny_system.config, PilotPlan(20, phase_seed=3))
    quiet = measure(practical, sched, PilotPlan(20, snr_db="noiseless"), 1)
    inf = measure(practical, sched, PilotPlan(20, snr_db=math.inf), 2)
    assert np.array_equal(quiet.y, inf.y)


def test_noiseless_ignores_noise_seed(tiny_system, practical):
    plan = PilotPlan(10)
    sched = generate_phase_schedule(tiny_system.config, plan)
    assert np.array_equal(measure(practical, sched, plan, 1).y, measure(practical, sched, plan, 99).y)


def test_empirical_snr(tiny_system, practical):
    plan = PilotPlan(1000, phase_seed=5, snr_db=20.0)
    sched = generate_phase_schedule(tiny_system.config, plan)
    clean = cascade_response(practical, sched)
    noisy = measure(practical, sched, plan, noise_seed=6)
    noise = noisy.y - clean
    snr = 10 * np.log10(np.mean(np.abs(clean) ** 2) / np.mean(np.abs(noise) ** 2))
    assert abs(snr - 20.0) <= 0.5
    # circular symmetry: real and imaginary parts carry equal power
    assert np.var(noise.real) == pytest.approx(np.var(noise.imag), rel=0.1)


def test_pilot_symbol_scales_output(tiny_system, practical):
    sym = 0.6 - 0.8j
    plan = PilotPlan(5, pilot_symbol=sym)
    sched = generate_phase_schedule(tiny_system.config, plan)
    np.testing.assert_allclose(measure(practical, sched, plan, 0).y, sym * cascade_response(practical, sched), rtol=1e-15)


def test_dimension_mismatch(tiny_system, practical):
    with pytest.raises(DimensionError):
        measure(practical, np.zeros((3, 2, 9)), PilotPlan(3), 0)


@pytest.mark.parametrize("kw", [dict(num_slots=0), dict(num_slots=1, snr_db=float("nan")), dict(num_slots=1, snr_db="loud")])
def test_invalid_plan(kw):
    with pytest.raises(ConfigurationError):
        PilotPlan(**kw)


def test_csv_round_trip(tmp_path, tiny_system, practical):
    plan = PilotPlan(7, phase_seed=2, snr_db=10.0)
    meas = measure(practical, generate_phase_schedule(tiny_system.config, plan), plan, 4)
    main, side = meas.to_csv(tmp_path / "pilots.csv")
    assert main.read_text().splitlines()[0] == "slot,rx_index,re,im"
    assert side.read_text().splitlines()[0] == "slot,layer,atom,phase_radians"
    back = MeasurementSet.from_csv(main)
    assert np.array_equal(back.y, meas.y)
    assert np.array_equal(back.phases, meas.phases)


@settings(max_examples=20, deadline=None)
@given(phase_seed=st.integers(0, 2**63 - 1), noise_seed=st.integers(0, 2**63 - 1))
def test_measurement_is_pure(tiny_system, practical, phase_seed, noise_seed):
    plan = PilotPlan(4, phase_seed=phase_seed, snr_db=15.0)
    a = measure(practical, generate_phase_schedule(tiny_system.config, plan), plan, noise_seed)
    b = measure(practical, generate_phase_schedule(tiny_system.config, plan), plan, noise_seed)
    assert a.y.tobytes() == b.y.tobytes()


def test_intermediate_fields_not_exposed():
    public = {n for n in dir(MeasurementSet) if not n.startswith("_")}
    assert public <= {"phases", "y", "pilot_symbol", "num_slots", "subset", "to_csv", "from_csv"}
