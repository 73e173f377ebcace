"""Proportional occupancy control with quantized three-way FINC/FDEC decisions.

The controller demands a relative correction proportional to the summed
buffer occupancy error and steers the applied correction toward it one
step at a time, tracking what it has already asked for in c_est.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .errors import ConfigError


@dataclass(frozen=True)
class ControllerParams:
    k_p: float = 0.25
    beta_off: float = 0.0        # frames subtracted from each occupancy
    period_ticks: int = 125      # localticks between occupancy measurements
    delay_ticks: int = 0         # localticks from measurement to actuation
    gain_scale: float = 1e-3     # ppm of correction per frame of summed error

    def __post_init__(self):
        if self.k_p <= 0:
            raise ConfigError(f"k_p must be positive, got {self.k_p}")
        if self.period_ticks < 1:
            raise ConfigError(f"period_ticks must be >= 1, got {self.period_ticks}")
        if self.delay_ticks < 0:
            raise ConfigError(f"delay_ticks must be >= 0, got {self.delay_ticks}")
        if self.gain_scale <= 0:
            raise ConfigError(f"gain_scale must be positive, got {self.gain_scale}")


@dataclass(frozen=True)
class ControllerState:
    c_est_ppm: float = 0.0
    last_c_rel_ppm: float = 0.0


def relative_correction(occupancies: Sequence[float], params: ControllerParams) -> float:
    """Demanded correction in ppm: gain_scale * k_p * sum(beta - beta_off)."""
    return params.gain_scale * params.k_p * (sum(occupancies) - params.beta_off * len(occupancies))


def decide(c_rel_ppm: float, state: ControllerState) -> int:
    # Exact float comparison is deliberate: c_est is an exact multiple of the
    # step size, so a genuine tie must yield no pulse.
    if c_rel_ppm > state.c_est_ppm:
        return 1
    if c_rel_ppm < state.c_est_ppm:
        return -1
    return 0


def commit(state: ControllerState, direction: int, step_size_ppm: float,
           c_rel_ppm: float | None = None) -> ControllerState:
    """Account for an issued pulse: c_est accumulates step_size per direction."""
    return ControllerState(
        c_est_ppm=state.c_est_ppm + step_size_ppm * direction,
        last_c_rel_ppm=state.last_c_rel_ppm if c_rel_ppm is None else c_rel_ppm,
    )
