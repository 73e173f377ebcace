"""Adjustable oscillators: quantized step corrections and exact piecewise-linear phase.

Frequencies are kept in the factored form nominal*(1 + offset_ppm*1e-6)*(1 +
step_ppm*1e-6*net_steps) and offsets are reported in ppm, never as absolute
hertz differences, to avoid catastrophic cancellation when plotting.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, replace

from .errors import PhaseQueryError, SyntonyError

NOMINAL_HZ = 125e6


@dataclass(frozen=True)
class Oscillator:
    nominal_hz: float = NOMINAL_HZ
    offset_ppm: float = 0.0  # unadjusted deviation from nominal


@dataclass(frozen=True)
class Actuator:
    step_size_ppm: float = 0.01
    min_pulse_interval: float = 1e-6
    net_steps: int = 0  # increments minus decrements
    last_pulse_time: float | None = None


def effective_frequency(osc: Oscillator, act: Actuator) -> float:
    """Oscillator output in Hz after the accumulated step corrections."""
    return frequency_hz(osc.nominal_hz, osc.offset_ppm, act.step_size_ppm, act.net_steps)


def frequency_hz(nominal_hz: float, offset_ppm: float, step_ppm: float, net_steps: int) -> float:
    return nominal_hz * (1.0 + offset_ppm * 1e-6) * (1.0 + step_ppm * 1e-6 * net_steps)


def apply_pulse(act: Actuator, direction: int, t: float) -> Actuator:
    """Apply one FINC (+1) / FDEC (-1) pulse at time t; direction 0 is a no-op."""
    if direction not in (-1, 0, 1):
        raise SyntonyError(f"pulse direction must be -1, 0, or +1, got {direction}")
    if direction == 0:
        return act
    if act.last_pulse_time is not None and t - act.last_pulse_time < act.min_pulse_interval:
        raise SyntonyError(
            f"pulse at t={t:.9g} only {t - act.last_pulse_time:.3g}s after previous "
            f"(minimum {act.min_pulse_interval:.3g}s)")
    return replace(act, net_steps=act.net_steps + direction, last_pulse_time=t)


class PhaseHistory:
    """Piecewise-linear phase theta(t): one (start_time, start_phase, frequency)
    segment per actuation epoch, each segment open-ended until the next starts.
    """

    __slots__ = ("times", "phases", "freqs")

    def __init__(self, start_time: float, start_phase: float, frequency: float):
        if frequency <= 0:
            raise SyntonyError(f"frequency must be positive, got {frequency}")
        self.times = [start_time]
        self.phases = [start_phase]
        self.freqs = [frequency]

    def append(self, t: float, frequency: float) -> None:
        """Start a new constant-frequency segment at t; phase stays continuous."""
        if t < self.times[-1]:
            raise SyntonyError(f"segment start {t} precedes previous segment {self.times[-1]}")
        if frequency <= 0:
            raise SyntonyError(f"frequency must be positive, got {frequency}")
        self.times.append(t)
        self.phases.append(self.phase_at(t))
        self.freqs.append(frequency)

    def segment_index(self, t: float) -> int:
        if t < self.times[0]:
            raise PhaseQueryError(f"t={t} precedes history start {self.times[0]}")
        return bisect_right(self.times, t) - 1

    def phase_at(self, t: float) -> float:
        i = self.segment_index(t)
        return self.phases[i] + (t - self.times[i]) * self.freqs[i]

    def time_of_localtick(self, k: float) -> float:
        """Inverse of phase_at: the time at which the phase reaches k."""
        if k < self.phases[0]:
            raise PhaseQueryError(f"phase {k} precedes history start phase {self.phases[0]}")
        i = bisect_right(self.phases, k) - 1
        return self.times[i] + (k - self.phases[i]) / self.freqs[i]

    def prune(self, min_time: float) -> int:
        """Drop whole segments strictly before the one covering min_time.

        Queries at t >= min_time are unaffected. Returns segments dropped.
        """
        i = self.segment_index(min_time)
        if i > 0:
            del self.times[:i], self.phases[:i], self.freqs[:i]
        return i
