"""Occupancy trackers: real elastic buffers and domain-difference counters.

The DDC side models the hardware pair of wrapping counters (frames arrived
vs frames departed) whose Gray-coded low bits cross clock domains and are
extended to 64 bits; the signed-32 difference acts as a virtual elastic
buffer where zero means half-full.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .errors import AccountingFault, SimulationFault, SyntonyError

DEFAULT_GRAY_BITS = 6     # low counter width before extension
EXTENDED_BITS = 64
EB_DEPTH = 32
EB_INIT = 18              # half full + 2


def gray_encode(x: int, width_bits: int) -> int:
    if not 0 <= x < (1 << width_bits):
        raise SyntonyError(f"value {x} out of range for {width_bits}-bit counter")
    return x ^ (x >> 1)


def gray_decode(g: int, width_bits: int) -> int:
    if not 0 <= g < (1 << width_bits):
        raise SyntonyError(f"code {g} out of range for {width_bits}-bit counter")
    x = g
    shift = 1
    while shift < width_bits:
        x ^= x >> shift
        shift <<= 1
    return x


@dataclass
class WrappingCounter:
    width_bits: int = DEFAULT_GRAY_BITS
    value: int = 0

    def increment(self, by: int = 1) -> None:
        self.value = (self.value + by) % (1 << self.width_bits)


def sample_gray(counter: WrappingCounter, mid_transition: bool = False,
                rng: random.Random | None = None) -> int:
    """Gray code as seen from the always-on domain.

    A sample taken mid-transition resolves to either the old or the new
    value (never a third one), because consecutive codes differ in one bit.
    """
    value = counter.value
    if mid_transition:
        if (rng or random).random() < 0.5:
            value = (value - 1) % (1 << counter.width_bits)
    return gray_encode(value, counter.width_bits)


@dataclass(frozen=True)
class ExtendedCounter:
    width_bits: int = DEFAULT_GRAY_BITS
    extended: int = 0  # full unsigned count, low bits mirror the wrapping counter

    @property
    def low(self) -> int:
        return self.extended % (1 << self.width_bits)


def extend(prev: ExtendedCounter, sampled_low: int) -> ExtendedCounter:
    """Fold a newly sampled low count into the running extended count.

    The true counter must have advanced by less than 2^(n-1) since the
    previous sample; a delta of exactly 2^n - 1 is read as the one-step
    backward correction a mid-transition sample can produce.
    """
    modulus = 1 << prev.width_bits
    if not 0 <= sampled_low < modulus:
        raise SyntonyError(f"sampled value {sampled_low} out of range for {prev.width_bits} bits")
    delta = (sampled_low - prev.extended) % modulus
    if delta == modulus - 1:
        delta = -1
    elif delta > modulus // 2:
        raise AccountingFault(
            "counter-extension",
            f"low counter advanced by {delta} >= 2^{prev.width_bits - 1} between samples")
    new = prev.extended + delta
    return replace(prev, extended=new % (1 << EXTENDED_BITS))


def ddc_occupancy(rx: ExtendedCounter | int, tx: ExtendedCounter | int) -> int:
    """Signed-32 truncation of rx - tx; zero indicates half-full."""
    rx_count = rx.extended if isinstance(rx, ExtendedCounter) else rx
    tx_count = tx.extended if isinstance(tx, ExtendedCounter) else tx
    return ((rx_count - tx_count + (1 << 31)) % (1 << 32)) - (1 << 31)


@dataclass
class ElasticBuffer:
    depth: int = EB_DEPTH
    occupancy: int = EB_INIT
    writes: int = 0  # counters kept for logical-latency bookkeeping
    reads: int = 0


def eb_push(buf: ElasticBuffer, *, t: float | None = None,
            link: tuple[int, int] | None = None) -> None:
    if buf.occupancy >= buf.depth:
        raise SimulationFault("eb-overflow",
                              f"push at occupancy {buf.occupancy} (depth {buf.depth})",
                              t=t, link=link)
    buf.occupancy += 1
    buf.writes += 1


def eb_pop(buf: ElasticBuffer, *, t: float | None = None,
           link: tuple[int, int] | None = None) -> None:
    if buf.occupancy <= 0:
        raise SimulationFault("eb-underflow", "pop from empty buffer", t=t, link=link)
    buf.occupancy -= 1
    buf.reads += 1


def reframe(ddc_value: int, eb_init: int = EB_INIT,
            depth: int = EB_DEPTH) -> tuple[ElasticBuffer, int]:
    """Idealized recentering switch-over from the virtual to the real buffer.

    Returns the freshly centered buffer and lambda_delta, the change in
    effective logical latency (frames logically discarded or inserted).
    """
    if not 0 <= eb_init <= depth:
        raise SyntonyError(f"eb_init {eb_init} outside [0, {depth}]")
    return ElasticBuffer(depth=depth, occupancy=eb_init), eb_init - ddc_value
