"""Closed-loop network simulation.

The reference simulator is event-driven and exact: node frequencies are
piecewise constant, so phases are piecewise linear and every quantity
(occupancies, measurement times, pulse times) has a closed form. No ODE
stepping is involved, which lets the frame-level oracle check occupancies
for integer equality.
"""

from __future__ import annotations

import heapq
import math
import random
from bisect import bisect_right
from dataclasses import dataclass, replace

from .clock import PhaseHistory, frequency_hz
from .errors import ConfigError, SimulationFault
from .telemetry import ReframeRecord, Telemetry
from .topology import Topology, validate

MODES = ("ddc", "elastic", "ddc_then_reframe")

# Priorities at equal event times: frame motion settles first, then the
# reframe switch-over, then measurements observe the settled state.
PRIO_ARRIVE = 0
PRIO_TICK = 1
PRIO_REFRAME = 2
PRIO_MEASURE = 3
PRIO_ACTUATE = 4
PRIO_TELEM = 5


@dataclass(frozen=True)
class SimConfig:
    topology: Topology
    duration: float
    mode: str = "ddc"
    seed: int = 0
    nominal_hz: float = 125e6
    offset_ppm_bound: float = 8.0
    offsets_ppm: tuple[float, ...] | None = None
    step_ppm: float = 0.01
    min_pulse_interval: float = 0.99e-6
    phase_offset_max_ticks: int = 1_000_000
    k_p: float = 0.25
    gain_scale: float = 1e-3          # ppm of correction per frame of summed error
    beta_off: float | None = None     # None resolves to 0 (ddc) or eb_depth/2 (elastic)
    period_ticks: int = 125
    delay_ticks: int = 0
    eb_depth: int = 32
    eb_init: int = 18
    pipeline_frames: float = 15.0     # per-direction transceiver delay, in frames
    pipeline_jitter: int = 0
    reframe_at: float | None = None
    telemetry_cadence: float = 0.06
    keep_frames: bool = False
    divergence_ppm: float = 196.0
    record_pulses: bool = True

    def resolved_beta_off(self) -> float:
        if self.beta_off is not None:
            return self.beta_off
        return self.eb_depth / 2.0 if self.mode == "elastic" else 0.0

    def check(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.duration <= 0:
            raise ConfigError(f"duration must be positive, got {self.duration}")
        if self.telemetry_cadence <= 0:
            raise ConfigError(f"telemetry cadence must be positive, got {self.telemetry_cadence}")
        if self.nominal_hz <= 0 or self.step_ppm <= 0:
            raise ConfigError("nominal_hz and step_ppm must be positive")
        if self.k_p <= 0 or self.gain_scale <= 0:
            raise ConfigError("k_p and gain_scale must be positive")
        if self.period_ticks < 1 or self.delay_ticks < 0:
            raise ConfigError("period_ticks must be >= 1 and delay_ticks >= 0")
        if self.delay_ticks >= self.period_ticks:
            raise ConfigError("delay_ticks must be smaller than period_ticks")
        if not 0 <= self.eb_init <= self.eb_depth:
            raise ConfigError(f"eb_init {self.eb_init} outside [0, {self.eb_depth}]")
        if self.pipeline_frames < 0 or self.pipeline_jitter < 0:
            raise ConfigError("pipeline_frames and pipeline_jitter must be >= 0")
        errors, _ = validate(self.topology)
        if errors:
            raise ConfigError("invalid topology: " + "; ".join(errors))
        if self.offsets_ppm is not None:
            if len(self.offsets_ppm) != self.topology.n_nodes:
                raise ConfigError(
                    f"offsets_ppm has {len(self.offsets_ppm)} entries for "
                    f"{self.topology.n_nodes} nodes")
            for off in self.offsets_ppm:
                if abs(off) > self.offset_ppm_bound:
                    raise ConfigError(f"offset {off} ppm exceeds bound {self.offset_ppm_bound}")
        # A pulse per sample must respect the clock-board interval even for the
        # fastest credible clock.
        fastest = self.nominal_hz * (1.0 + self.divergence_ppm * 1e-6)
        if self.period_ticks / fastest < self.min_pulse_interval:
            raise ConfigError(
                f"period_ticks={self.period_ticks} samples faster than the "
                f"minimum pulse interval {self.min_pulse_interval}s allows")
        if self.mode == "ddc_then_reframe":
            if self.reframe_at is None or not 0 < self.reframe_at < self.duration:
                raise ConfigError("ddc_then_reframe requires reframe_at within (0, duration)")
            warmup = 2 * self.eb_depth / self.nominal_hz + self.max_link_latency()
            if self.reframe_at < warmup:
                raise ConfigError(f"reframe_at {self.reframe_at} earlier than warmup {warmup:.3g}")

    def max_link_latency(self) -> float:
        per_side = (self.pipeline_frames + self.pipeline_jitter) / self.nominal_hz
        return max((lk.latency for lk in self.topology.links), default=0.0) + per_side


class NodeRuntime:
    """Per-node clock, controller, and incoming-link state."""

    __slots__ = ("idx", "omega_u", "offset_ppm", "t0_int", "frac",
                 "seg_t", "seg_p", "seg_w", "k", "c_est", "net",
                 "last_pulse", "pend_dir", "in_links")

    def __init__(self, idx: int, offset_ppm: float, frac: float, t0_int: int,
                 nominal_hz: float, t_back: float):
        self.idx = idx
        self.offset_ppm = offset_ppm
        self.omega_u = frequency_hz(nominal_hz, offset_ppm, 0.0, 0)
        self.t0_int = t0_int
        self.frac = frac
        theta0 = t0_int + frac
        self.seg_t = [t_back]
        self.seg_p = [theta0 + self.omega_u * t_back]
        self.seg_w = [self.omega_u]
        self.k = 0
        self.c_est = 0.0
        self.net = 0
        self.last_pulse: float | None = None
        self.pend_dir = 0
        self.in_links: list[LinkRuntime] = []

    def phase_history(self) -> PhaseHistory:
        hist = PhaseHistory(self.seg_t[0], self.seg_p[0], self.seg_w[0])
        for i in range(1, len(self.seg_t)):
            hist.append(self.seg_t[i], self.seg_w[i])
        return hist

    def phase_at(self, t: float) -> float:
        i = bisect_right(self.seg_t, t) - 1
        return self.seg_p[i] + (t - self.seg_t[i]) * self.seg_w[i]


class LinkRuntime:
    """State of one directed link, owned by the destination node."""

    __slots__ = ("src", "dst", "latency", "lam_ctrl", "lam_data", "cursor", "eb")

    def __init__(self, src: int, dst: int, latency: float):
        self.src = src
        self.dst = dst
        self.latency = latency  # physical flight plus transceiver pipeline
        self.lam_ctrl = 0
        self.lam_data = 0
        self.cursor = 0
        self.eb = False


def buffer_occupancy_model(sender_hist: PhaseHistory, receiver_hist: PhaseHistory,
                           latency: float, lam: int, t: float) -> int:
    """Occupancy of the link buffer at time t under the frame-flow model:
    frames sent up to t-latency minus frames consumed up to t, plus the
    link's constant logical latency.
    """
    return (math.floor(sender_hist.phase_at(t - latency))
            - math.floor(receiver_hist.phase_at(t)) + lam)


def build_runtime(cfg: SimConfig) -> tuple[list[NodeRuntime], list[LinkRuntime]]:
    """Seeded construction of node and link state, shared by both simulators."""
    cfg.check()
    rng = random.Random(cfg.seed)
    n = cfg.topology.n_nodes
    t_back = -(cfg.max_link_latency() + 1024.0 / cfg.nominal_hz)
    nodes = []
    for i in range(n):
        offset = (cfg.offsets_ppm[i] if cfg.offsets_ppm is not None
                  else rng.uniform(-cfg.offset_ppm_bound, cfg.offset_ppm_bound))
        frac = 0.01 + 0.98 * rng.random()  # keep phases clear of tick boundaries
        t0_int = rng.randrange(cfg.phase_offset_max_ticks + 1)
        nodes.append(NodeRuntime(i, offset, frac, t0_int, cfg.nominal_hz, t_back))

    links = []
    for lk in cfg.topology.links:
        pipeline = cfg.pipeline_frames
        if cfg.pipeline_jitter:
            pipeline += rng.randint(-cfg.pipeline_jitter, cfg.pipeline_jitter)
        run = LinkRuntime(lk.src, lk.dst, lk.latency + pipeline / cfg.nominal_hz)
        links.append(run)
        nodes[lk.dst].in_links.append(run)
    for node in nodes:
        node.in_links.sort(key=lambda r: r.src)

    eb_base = cfg.eb_init if cfg.mode == "elastic" else 0
    for run in links:
        sender = nodes[run.src]
        floor_sender = math.floor(sender.seg_p[0] + (-run.latency - sender.seg_t[0]) * sender.seg_w[0])
        lam_v = nodes[run.dst].t0_int - floor_sender
        run.lam_ctrl = lam_v + eb_base
        run.lam_data = run.lam_ctrl
        run.eb = cfg.mode == "elastic"
    return nodes, links


def simulate(cfg: SimConfig) -> Telemetry:
    """Run the exact hybrid simulation and return its telemetry."""
    nodes, links = build_runtime(cfg)
    tel = Telemetry(nominal_hz=cfg.nominal_hz, mode=cfg.mode, duration=cfg.duration,
                    seed=cfg.seed, n_nodes=len(nodes))
    for run in links:
        tel.lambdas_initial[(run.src, run.dst)] = run.lam_ctrl

    p = cfg.period_ticks
    d = cfg.delay_ticks
    beta_off = cfg.resolved_beta_off()
    gain_ppm = cfg.gain_scale * cfg.k_p
    fs = cfg.step_ppm
    nominal = cfg.nominal_hz
    depth = cfg.eb_depth
    duration = cfg.duration
    floor = math.floor

    counts = {"measurements": 0, "pulses": 0, "segments": 0, "telemetry": 0}
    heap: list[tuple[float, int, int]] = [(0.0, PRIO_TELEM, -1)]
    for node in nodes:
        heap.append((0.0, PRIO_MEASURE, node.idx))
    if cfg.mode == "ddc_then_reframe":
        heap.append((cfg.reframe_at, PRIO_REFRAME, -1))
    heapq.heapify(heap)

    def occupancy_at(run: LinkRuntime, t: float) -> int:
        sender = nodes[run.src]
        receiver = nodes[run.dst]
        lam = run.lam_data if run.eb else run.lam_ctrl
        return (floor(sender.phase_at(t - run.latency))
                - floor(receiver.phase_at(t)) + lam)

    def check_eb_bounds(value: int, t: float, run: LinkRuntime) -> None:
        if value < 0:
            raise SimulationFault("eb-underflow", f"occupancy {value}", t=t,
                                  node=run.dst, link=(run.src, run.dst))
        if value > depth:
            raise SimulationFault("eb-overflow", f"occupancy {value} exceeds depth {depth}",
                                  t=t, node=run.dst, link=(run.src, run.dst))

    def actuate(node: NodeRuntime, t: float, direction: int) -> None:
        node.c_est += fs * direction
        if direction == 0:
            return
        if node.last_pulse is not None and t - node.last_pulse < cfg.min_pulse_interval:
            raise SimulationFault(
                "pulse-rate", f"pulse only {t - node.last_pulse:.3g}s after previous",
                t=t, node=node.idx)
        node.last_pulse = t
        node.net += direction
        counts["pulses"] += 1
        if cfg.record_pulses:
            tel.pulses.append((t, node.idx, direction))
        w_new = frequency_hz(nominal, node.offset_ppm, fs, node.net)
        offset_total = (w_new / nominal - 1.0) * 1e6
        if abs(offset_total) > cfg.divergence_ppm:
            raise SimulationFault("divergence",
                                  f"frequency offset {offset_total:.3f} ppm beyond "
                                  f"±{cfg.divergence_ppm} ppm guard", t=t, node=node.idx)
        phase_now = node.seg_p[-1] + (t - node.seg_t[-1]) * node.seg_w[-1]
        node.seg_t.append(t)
        node.seg_p.append(phase_now)
        node.seg_w.append(w_new)
        counts["segments"] += 1

    def schedule_measure(node: NodeRuntime) -> None:
        target = (node.t0_int + node.k * p) + node.frac
        t_next = node.seg_t[-1] + (target - node.seg_p[-1]) / node.seg_w[-1]
        heapq.heappush(heap, (t_next, PRIO_MEASURE, node.idx))

    while heap:
        t, prio, idx = heapq.heappop(heap)
        if t > duration:
            break

        if prio == PRIO_MEASURE:
            node = nodes[idx]
            counts["measurements"] += 1
            floor_i = node.t0_int + node.k * p
            total_beta = 0
            n_links = 0
            for run in node.in_links:
                tq = t - run.latency
                sender = nodes[run.src]
                seg_t = sender.seg_t
                ci = run.cursor
                last = len(seg_t) - 1
                while ci < last and seg_t[ci + 1] <= tq:
                    ci += 1
                run.cursor = ci
                theta_j = sender.seg_p[ci] + (tq - seg_t[ci]) * sender.seg_w[ci]
                beta = floor(theta_j) - floor_i + run.lam_ctrl
                if run.eb:
                    eb_val = beta + (run.lam_data - run.lam_ctrl)
                    check_eb_bounds(eb_val, t, run)
                    if cfg.mode == "elastic":
                        beta = eb_val
                total_beta += beta
                n_links += 1
            c_rel = gain_ppm * (total_beta - beta_off * n_links)
            if c_rel > node.c_est:
                direction = 1
            elif c_rel < node.c_est:
                direction = -1
            else:
                direction = 0
            if d == 0:
                actuate(node, t, direction)
                node.k += 1
                schedule_measure(node)
            else:
                node.pend_dir = direction
                target = (node.t0_int + node.k * p + d) + node.frac
                t_act = node.seg_t[-1] + (target - node.seg_p[-1]) / node.seg_w[-1]
                heapq.heappush(heap, (t_act, PRIO_ACTUATE, idx))

        elif prio == PRIO_ACTUATE:
            node = nodes[idx]
            actuate(node, t, node.pend_dir)
            node.k += 1
            schedule_measure(node)

        elif prio == PRIO_TELEM:
            counts["telemetry"] += 1
            for node in nodes:
                w = node.seg_w[-1]
                ppm = (w / nominal - 1.0) * 1e6
                tel.freq.append((t, node.idx, ppm, node.c_est, node.net))
            for run in links:
                value = occupancy_at(run, t)
                if run.eb:
                    check_eb_bounds(value, t, run)
                tel.occupancy.append((t, run.dst, run.src, value, "eb" if run.eb else "ddc"))
            t_next = t + cfg.telemetry_cadence
            if t_next < duration:
                heapq.heappush(heap, (t_next, PRIO_TELEM, -1))

        else:  # PRIO_REFRAME
            for run in links:
                ddc_value = occupancy_at(run, t)
                delta = cfg.eb_init - ddc_value
                run.lam_data = run.lam_ctrl + delta
                run.eb = True
                receiver = nodes[run.dst]
                tel.reframes.append(ReframeRecord(
                    t=t, node=run.dst, src=run.src, ddc_value=ddc_value,
                    lambda_delta=delta,
                    recv_tick_boundary=floor(receiver.phase_at(t))))

    for run in links:
        tel.lambdas[(run.src, run.dst)] = run.lam_data if run.eb else run.lam_ctrl
    tel.event_counts = counts
    return tel
