import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simcal.errors import ConfigurationError, DimensionError, SingularityError
from simcal.geometry import ErrorBounds, ErrorState, LayerGeometry, SimStackConfig, apply_errors, build_ideal_geometry, sample_errors
from simcal.propagation import (
    PropagationModel,
    PropagationSet,
    cascade_response,
    exit_matrix,
    interlayer_matrix,
    radar_coefficient,
    rs_coefficient,
    ue_at,
    ue_channel,
)
from simcal.validation import brute_interlayer, path_sum_response

from conftest import LAMBDA

Y = np.array([0.0, 1.0, 0.0])
A = (LAMBDA / 2) ** 2


def rs_reference(d, cos_chi, lam, area):
    # scalar re-statement with cmath, kept apart from the vectorized kernel
    return (area * cos_chi / d) * (1 / (2 * math.pi * d) - 1j / lam) * cmath.exp(1j * 2 * math.pi * d / lam)


def single(y, normal=Y):
    return LayerGeometry(0, np.array([[0.0, y, 0.0]]), normal)


def test_rs_full_wavelength_phase():
    w = rs_coefficient([0, 0, 0], [0.3 * LAMBDA, 0.8 * LAMBDA, math.sqrt(1 - 0.73) * LAMBDA], Y, LAMBDA, A)
    prefactor_phase = cmath.phase(1 / (2 * math.pi * LAMBDA) - 1j / LAMBDA)
    assert cmath.phase(w) == pytest.approx(prefactor_phase, abs=1e-12)


def test_rs_cosine_null():
    assert rs_coefficient([0, 0, 0], [LAMBDA, 0, 0], Y, LAMBDA, A) == 0


def test_rs_closed_form_boresight():
    w = rs_coefficient([0, 0, 0], [0, LAMBDA, 0], Y, LAMBDA, A)
    expected = (A / LAMBDA) * (1 / (2 * math.pi * LAMBDA) - 1j / LAMBDA)
    assert w == pytest.approx(expected, rel=1e-12)


def test_rs_zero_distance_raises():
    with pytest.raises(SingularityError):
        rs_coefficient([0, 0, 0], [0, 0, 0], Y, LAMBDA, A)
    with pytest.raises(SingularityError):
        rs_coefficient([0, 0, 0], [0, LAMBDA / 200, 0], Y, LAMBDA, A)


def test_radar_null_and_inverse_distance():
    assert radar_coefficient([0, 0, 0], [LAMBDA, 0, 0], Y, -Y, LAMBDA, A) == 0
    near = radar_coefficient([0, 0, 0], [0, 3 * LAMBDA, 2 * LAMBDA], Y, -Y, LAMBDA, A)
    far = radar_coefficient([0, 0, 0], [0, 6 * LAMBDA, 4 * LAMBDA], Y, -Y, LAMBDA, A)
    assert abs(far) == pytest.approx(abs(near) / 2, rel=1e-12)


def test_radar_boresight_closed_form():
    d = 10 * LAMBDA
    got = radar_coefficient([0, 0, 0], [0, d, 0], Y, -Y, LAMBDA, A)
    expected = math.sqrt(16 * A / (4 * math.pi * d * d)) * cmath.exp(2j * math.pi * d / LAMBDA)
    assert got == pytest.approx(expected, rel=1e-12)


def test_radar_zero_distance_raises():
    with pytest.raises(SingularityError):
        radar_coefficient([0, 0, 0], [0, 0, 0], Y, -Y, LAMBDA, A)


def test_single_pair_interlayer():
    s = 0.7 * LAMBDA
    w = interlayer_matrix(single(0.0), single(s), "RayleighSommerfeld", LAMBDA, A)
    assert w.shape == (1, 1)
    assert w[0, 0] == pytest.approx(rs_reference(s, 1.0, LAMBDA, A), rel=1e-13)


def test_closer_layers_are_stronger():
    cfg = SimStackConfig.from_frequency(2, 3, 28e9, 0.01)
    ideal = build_ideal_geometry(cfg)
    closer = apply_errors(ideal, ErrorState(np.array([0.0, -0.05 * LAMBDA]), np.zeros(2), np.zeros(2)))
    base = np.abs(interlayer_matrix(*ideal, "RayleighSommerfeld", LAMBDA, cfg.atom_area)).mean()
    near = np.abs(interlayer_matrix(*closer, "RayleighSommerfeld", LAMBDA, cfg.atom_area)).mean()
    assert near > base


@pytest.mark.parametrize("model", list(PropagationModel))
def test_six_by_six_brute_force(model):
    cfg = SimStackConfig.from_frequency(4, 6, 28e9, 0.01)
    a, b = build_ideal_geometry(cfg)[:2]
    fast = interlayer_matrix(a, b, model, LAMBDA, cfg.atom_area)
    slow = brute_interlayer(a, b, model, LAMBDA, cfg.atom_area)
    assert fast.shape == (36, 36)
    np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=0)


def test_coincident_planes_raise():
    with pytest.raises(SingularityError):
        interlayer_matrix(single(0.0), single(0.0), "RayleighSommerfeld", LAMBDA, A)


def test_ue_on_axis_phase_and_scaling():
    layer = single(0.0)
    d = 30.0
    h = ue_channel([0, -d, 0], layer, LAMBDA, A)
    assert h.shape == (1,)
    expected_phase = math.remainder(2 * math.pi * d / LAMBDA, 2 * math.pi)
    assert cmath.phase(h[0]) == pytest.approx(expected_phase, abs=1e-6)
    h2 = ue_channel([0, -2 * d, 0], layer, LAMBDA, A)
    assert abs(h2[0]) / abs(h[0]) == pytest.approx(0.5, abs=1e-6)


def test_ue_channel_paper_scene_is_finite():
    cfg = SimStackConfig.from_frequency(4, 6, 28e9, 0.01)
    h = ue_channel(ue_at(30.0, math.radians(20), math.radians(45)), build_ideal_geometry(cfg)[0], cfg.wavelength, cfg.atom_area)
    assert np.all(np.isfinite(h)) and np.all(h != 0)


def test_ue_behind_layer_rejected():
    with pytest.raises(ConfigurationError):
        ue_channel([0, 1.0, 0], single(0.0), LAMBDA, A)


def test_exit_matrix_single_and_permutation():
    layer = single(0.0)
    w = exit_matrix(layer, [[0, 2 * LAMBDA, 0]], LAMBDA, A)
    assert w[0, 0] == pytest.approx(rs_coefficient([0, 0, 0], [0, 2 * LAMBDA, 0], Y, LAMBDA, A), rel=1e-13)

    cfg = SimStackConfig.from_frequency(2, 2, 28e9, 0.01)
    last = build_ideal_geometry(cfg)[-1]
    rx = np.array([[x, 0.01 + LAMBDA, z] for x in (-LAMBDA / 4, LAMBDA / 4) for z in (-LAMBDA / 4, LAMBDA / 4)])
    w = exit_matrix(last, rx, LAMBDA, cfg.atom_area)
    perm = [2, 0, 3, 1]
    np.testing.assert_array_equal(exit_matrix(last, rx[perm], LAMBDA, cfg.atom_area), w[perm])
    slow = np.array([[rs_coefficient(p, r, last.normal, LAMBDA, cfg.atom_area) for p in last.atom_positions] for r in rx])
    np.testing.assert_allclose(w, slow, rtol=1e-12, atol=0)


def test_neutral_and_negated_cascade():
    one = PropagationSet(np.ones(1, complex), [np.ones((1, 1), complex)], np.ones((1, 1), complex))
    assert cascade_response(one, np.zeros((2, 1)))[0] == 1
    rng = np.random.default_rng(4)
    cfg = SimStackConfig.from_frequency(3, 2, 28e9, 0.01)
    layers = build_ideal_geometry(cfg)
    pset = PropagationSet(
        rng.standard_normal(4) + 1j * rng.standard_normal(4),
        [interlayer_matrix(a, b, "RayleighSommerfeld", LAMBDA, cfg.atom_area) for a, b in zip(layers, layers[1:])],
        rng.standard_normal((3, 4)) + 0j,
    )
    ph = rng.uniform(0, 2 * np.pi, (3, 4))
    flipped = ph.copy()
    flipped[1] += np.pi
    np.testing.assert_allclose(cascade_response(pset, flipped), -cascade_response(pset, ph), rtol=1e-12)


def test_cascade_dimension_error_names_stage():
    bad = PropagationSet(np.ones(4, complex), [np.ones((4, 3), complex)], np.ones((2, 4), complex))
    with pytest.raises(DimensionError, match="W1"):
        cascade_response(bad, np.zeros((2, 4)))


def random_stack(seed, layers=3, side=2, rx=3):
    rng = np.random.default_rng(seed)
    cfg = SimStackConfig.from_frequency(layers, side, 28e9, 0.01)
    geo = apply_errors(build_ideal_geometry(cfg), sample_errors(ErrorBounds(1e-4, 1e-3, 0.05), seed, layers))
    n = cfg.atoms_per_layer
    pset = PropagationSet(
        rng.standard_normal(n) + 1j * rng.standard_normal(n),
        [interlayer_matrix(a, b, "RayleighSommerfeld", LAMBDA, cfg.atom_area) for a, b in zip(geo, geo[1:])],
        rng.standard_normal((rx, n)) + 1j * rng.standard_normal((rx, n)),
    )
    return pset, rng.uniform(0, 2 * np.pi, (layers, n))


@pytest.mark.parametrize("seed", range(5))
def test_cascade_matches_path_sum(seed):
    pset, ph = random_stack(seed, layers=2 + seed % 2, side=2 + seed % 2)
    np.testing.assert_allclose(cascade_response(pset, ph), path_sum_response(pset, ph), rtol=1e-12)


def test_batched_cascade_matches_single():
    pset, ph = random_stack(11)
    batch = np.stack([ph, ph + 1.0, ph * 0.5])
    out = cascade_response(pset, batch)
    for t in range(3):
        np.testing.assert_allclose(out[t], cascade_response(pset, batch[t]), rtol=1e-13)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), re=st.floats(-5, 5), im=st.floats(-5, 5))
def test_cascade_linear_in_channel(seed, re, im):
    alpha = complex(re, im)
    pset, ph = random_stack(seed)
    scaled = pset.replace(h=alpha * pset.h)
    np.testing.assert_allclose(cascade_response(scaled, ph), alpha * cascade_response(pset, ph), rtol=1e-12, atol=1e-300)


@settings(max_examples=30, deadline=None)
@given(cos_chi=st.floats(0.05, 1.0), k0=st.floats(0.0, 3.0))
def test_rs_magnitude_decreasing(cos_chi, k0):
    d = LAMBDA / (2 * math.pi) * np.geomspace(1.0, 1e3, 40) * (1 + k0)
    sin_chi = math.sqrt(1 - cos_chi**2)
    mags = [abs(rs_coefficient([0, 0, 0], [x * sin_chi, x * cos_chi, 0], Y, LAMBDA, A)) for x in d]
    assert np.all(np.diff(mags) < 0)


@settings(max_examples=50, deadline=None)
@given(d=st.floats(0.02, 200.0))
def test_rs_phase_separates(d):
    d *= LAMBDA
    w = rs_coefficient([0, 0, 0], [0, d, 0], Y, LAMBDA, A)
    prefactor = (A / d) * (1 / (2 * math.pi * d) - 1j / LAMBDA)
    carrier = w / prefactor
    assert abs(carrier) == pytest.approx(1.0, abs=1e-12)
    assert cmath.phase(carrier) == pytest.approx(math.remainder(2 * math.pi * d / LAMBDA, 2 * math.pi), abs=1e-9)


def test_models_agree_in_far_field_for_unit_aperture():
    # boresight RS / radar magnitude ratio is sqrt(pi A) / (2 lambda); at A = lambda^2 it is about 0.89
    area = LAMBDA**2
    cfg = SimStackConfig(2, 3, LAMBDA, LAMBDA / 2, 12 * LAMBDA, area)
    a, b = build_ideal_geometry(cfg)
    rs = np.abs(interlayer_matrix(a, b, "RayleighSommerfeld", LAMBDA, area))
    radar = np.abs(interlayer_matrix(a, b, "GeometricRadar", LAMBDA, area))
    ratio = rs / radar
    assert ratio.max() <= 2 and ratio.min() >= 0.5
    assert np.median(ratio) == pytest.approx(math.sqrt(math.pi) / 2, rel=0.02)


def test_zero_error_set_is_bitwise_ideal(tiny_system):
    ideal = tiny_system.ideal_set
    zero = tiny_system.propagation_set(ErrorState.zeros(2))
    for name in ideal.names:
        assert np.array_equal(ideal[name], zero[name])
