"""State-driven calibration: watch a pilot-residual indicator during data transmission."""

from __future__ import annotations

import collections
from dataclasses import dataclass, field

import numpy as np

from .. import seeding
from ..errors import ConfigurationError
from ..propagation import PropagationSet
from .gradient import GradientSettings, run_gradient_stage
from .objective import slot_losses

_KNOWN_PHASES, _KNOWN_NOISE, _CALIB_PHASES, _CALIB_NOISE, _CHECK_PHASES, _CHECK_NOISE = range(6)


@dataclass(frozen=True)
class TriggerEvent:
    slot: int
    indicator_before: float
    indicator_after: float
    calibration_slots: int
    stage_status: str


@dataclass
class MonitorLog:
    events: list[TriggerEvent] = field(default_factory=list)
    indicator: list[tuple[int, float, float]] = field(default_factory=list)  # (slot, slot loss, window mean)
    estimate: PropagationSet | None = None


class DriftingSource:
    """Pilot source whose practical system changes at given data-slot times.

    ``segments`` is a list of ``(start_slot, PilotSource)`` sorted by start.
    """

    def __init__(self, segments):
        self.segments = sorted(segments, key=lambda s: s[0])
        if not self.segments or self.segments[0][0] > 0:
            raise ConfigurationError("the first segment must start at slot 0")

    def at(self, slot: int):
        active = self.segments[0][1]
        for start, source in self.segments:
            if start <= slot:
                active = source
        return active

    def acquire(self, slot: int, num_slots: int, phase_seed: int, noise_seed: int):
        return self.at(slot).acquire(num_slots, phase_seed, noise_seed)


def state_driven_monitor(
    estimate: PropagationSet,
    source: DriftingSource,
    num_data_slots: int,
    threshold: float,
    window: int,
    settings: GradientSettings,
    *,
    master_seed: int = 0,
    known_every: int = 20,
    calibration_slots: int = 100,
    unknowns=None,
    scales=None,
    reference: PropagationSet | None = None,
) -> MonitorLog:
    """Run the data phase, recalibrating whenever the indicator exceeds ``threshold``.

    One known-symbol slot is embedded every ``known_every`` data slots; the
    indicator is the mean normalized residual over the last ``window`` of
    them.  After a trigger the window restarts empty.
    """
    if not threshold > 0:
        raise ConfigurationError("threshold must be > 0")
    if window < 1 or known_every < 1:
        raise ConfigurationError("window and known_every must be >= 1")
    log = MonitorLog()
    recent: collections.deque[float] = collections.deque(maxlen=window)
    k = 0
    for slot in range(0, num_data_slots, known_every):
        k += 1
        meas = source.acquire(
            slot,
            1,
            seeding.derive_seed(master_seed, seeding.MONITOR, _KNOWN_PHASES, k),
            seeding.derive_seed(master_seed, seeding.MONITOR, _KNOWN_NOISE, k),
        )
        value = float(slot_losses(estimate, meas)[0])
        recent.append(value)
        level = sum(recent) / len(recent)
        log.indicator.append((slot, value, level))
        if level > threshold:
            calib = source.acquire(
                slot,
                calibration_slots,
                seeding.derive_seed(master_seed, seeding.MONITOR, _CALIB_PHASES, k),
                seeding.derive_seed(master_seed, seeding.MONITOR, _CALIB_NOISE, k),
            )
            result = run_gradient_stage(
                estimate, calib, settings, unknowns=unknowns, scales=scales, reference=reference
            )
            estimate = result.estimate
            check = source.acquire(
                slot,
                window,
                seeding.derive_seed(master_seed, seeding.MONITOR, _CHECK_PHASES, k),
                seeding.derive_seed(master_seed, seeding.MONITOR, _CHECK_NOISE, k),
            )
            after = float(np.mean(slot_losses(estimate, check)))
            log.events.append(TriggerEvent(slot, level, after, calibration_slots, result.status))
            recent.clear()
    log.estimate = estimate
    return log
