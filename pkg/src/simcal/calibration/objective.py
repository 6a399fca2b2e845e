"""Pilot-residual loss, its adjoint gradient, and the NMSE metric."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError, EmptyInputError, UndefinedReferenceError
from ..measurement import MeasurementSet
from ..propagation import PropagationSet

NMSE_FLOOR_DB = -300.0


def nmse_db(estimate, truth) -> float:
    estimate = np.asarray(estimate)
    truth = np.asarray(truth)
    if estimate.shape != truth.shape:
        raise DimensionError(f"estimate {estimate.shape} vs truth {truth.shape}")
    ref = np.vdot(truth, truth).real
    if ref == 0.0:
        raise UndefinedReferenceError("NMSE reference (truth) is all zeros")
    diff = estimate - truth
    err = np.vdot(diff, diff).real
    if err == 0.0:
        return NMSE_FLOOR_DB
    return max(NMSE_FLOOR_DB, float(10.0 * np.log10(err / ref)))


def _forward(pset: PropagationSet, phases: np.ndarray):
    """Returns the per-layer post-phase fields (L entries of (T, N)) and the output (T, N_rx)."""
    pset.check_dimensions()
    if phases.shape[1:] != (pset.num_layers, pset.h.shape[0]):
        raise DimensionError(f"stage phases: expected (*, {pset.num_layers}, {pset.h.shape[0]}), got {phases.shape}")
    rot = np.exp(1j * phases)
    fields = [pset.h[None, :] * rot[:, 0]]
    for l, w in enumerate(pset.interlayer, start=1):
        fields.append((fields[-1] @ w.T) * rot[:, l])
    return rot, fields, fields[-1] @ pset.w_out.T


def _residual(pset, meas):
    if meas.num_slots == 0:
        raise EmptyInputError("measurement set is empty")
    rot, fields, out = _forward(pset, meas.phases)
    err = meas.y - out * meas.pilot_symbol
    norm = np.vdot(meas.y, meas.y).real
    if norm == 0.0:
        raise UndefinedReferenceError("all measurements are zero")
    return rot, fields, err, norm


def pilot_loss(candidate: PropagationSet, measurements: MeasurementSet) -> float:
    """``sum_t ||y_t - model_t||^2 / sum_t ||y_t||^2``."""
    _, _, err, norm = _residual(candidate, measurements)
    return float(np.vdot(err, err).real / norm)


def slot_losses(candidate: PropagationSet, measurements: MeasurementSet) -> np.ndarray:
    """Per-slot normalized residual ``||y_t - model_t||^2 / ||y_t||^2``."""
    _, _, err, _ = _residual(candidate, measurements)
    return np.sum(np.abs(err) ** 2, axis=1) / np.sum(np.abs(measurements.y) ** 2, axis=1)


def pilot_loss_and_gradient(candidate: PropagationSet, measurements: MeasurementSet):
    """Loss and its conjugate Wirtinger gradient for every matrix in the set.

    For a real loss ``f`` the returned ``G = df/d conj(W)`` satisfies
    ``df = 2 Re <G, dW>``; steepest descent moves along ``-G``.
    """
    rot, fields, err, norm = _residual(candidate, measurements)
    loss = float(np.vdot(err, err).real / norm)
    # back-propagated adjoint: -conj(x) * e / norm pulled through each stage
    back = -np.conj(measurements.pilot_symbol) * err / norm
    grads = {"W_out": back.T @ np.conj(fields[-1])}
    back = back @ np.conj(candidate.w_out)
    for l in range(candidate.num_layers - 1, 0, -1):
        back = back * np.conj(rot[:, l])
        grads[f"W{l}"] = back.T @ np.conj(fields[l - 1])
        back = back @ np.conj(candidate.interlayer[l - 1])
    back = back * np.conj(rot[:, 0])
    grads["h"] = back.sum(axis=0)
    return loss, {name: grads[name] for name in candidate.names}


def pilot_loss_gradient(candidate: PropagationSet, measurements: MeasurementSet) -> dict[str, np.ndarray]:
    return pilot_loss_and_gradient(candidate, measurements)[1]
