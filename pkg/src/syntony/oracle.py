"""Frame-level discrete simulator: the independent ground truth.

Every frame is an explicit object here: one send per sender localtick per
outgoing link, physical flight, FIFO insertion, one pop per receiver
localtick per incoming link. The controller and actuator run exactly as in
the hybrid simulator, so occupancy traces are directly comparable.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

from .clock import frequency_hz
from .engine import (PRIO_ACTUATE, PRIO_ARRIVE, PRIO_MEASURE, PRIO_REFRAME,
                     PRIO_TELEM, PRIO_TICK, LinkRuntime, NodeRuntime,
                     SimConfig, build_runtime)
from .errors import ConfigError, SimulationFault
from .telemetry import ReframeRecord, Telemetry

MAX_ORACLE_NODES = 8
MAX_ORACLE_TICKS_PER_NODE = 6_250_000  # 50 ms at the 125 MHz hardware clock


@dataclass
class _FrameQueue:
    """Per-link frame bookkeeping on top of the shared LinkRuntime."""
    run: LinkRuntime
    arrivals: int = 0          # frames arrived since the trigger (plus preload)
    ticks: int = 0             # receiver localticks elapsed: the virtual pop count
    pop_rank: int = 0          # next arrival rank the ledger will assign a pop to
    queue: deque = field(default_factory=deque)     # (rank, send_tick), rank order
    pending: dict = field(default_factory=dict)     # rank -> recv_tick, pops before arrival
    recent: deque = field(default_factory=lambda: deque(maxlen=128))
    era: int = 0
    hists: list = field(default_factory=lambda: [{}])

    def occupancy(self) -> int:
        return self.arrivals - self.ticks if not self.run.eb else len(self.queue)


def _check_scale(cfg: SimConfig) -> None:
    if cfg.topology.n_nodes > MAX_ORACLE_NODES:
        raise ConfigError(
            f"discrete oracle is limited to {MAX_ORACLE_NODES} nodes, "
            f"got {cfg.topology.n_nodes}")
    ticks = cfg.duration * cfg.nominal_hz * (1 + 2e-4)
    if ticks > MAX_ORACLE_TICKS_PER_NODE:
        raise ConfigError(
            f"discrete oracle budget exceeded: ~{ticks:.3g} localticks per node "
            f"(limit {MAX_ORACLE_TICKS_PER_NODE}); shorten the run or lower nominal_hz")


def discrete_oracle(cfg: SimConfig) -> Telemetry:
    _check_scale(cfg)
    nodes, links = build_runtime(cfg)
    tel = Telemetry(nominal_hz=cfg.nominal_hz, mode=cfg.mode, duration=cfg.duration,
                    seed=cfg.seed, n_nodes=len(nodes))
    for run in links:
        tel.lambdas_initial[(run.src, run.dst)] = run.lam_ctrl

    fqs = [_FrameQueue(run) for run in links]
    out_links: list[list[int]] = [[] for _ in nodes]
    in_links: list[list[int]] = [[] for _ in nodes]
    for li, run in enumerate(links):
        out_links[run.src].append(li)
        in_links[run.dst].append(li)
    for node in nodes:  # controller reads occupancies in src order, as the hybrid does
        in_links[node.idx] = [li for li in in_links[node.idx]]
        in_links[node.idx].sort(key=lambda li: links[li].src)

    p = cfg.period_ticks
    d = cfg.delay_ticks
    beta_off = cfg.resolved_beta_off()
    gain_ppm = cfg.gain_scale * cfg.k_p
    fs = cfg.step_ppm
    nominal = cfg.nominal_hz
    depth = cfg.eb_depth
    duration = cfg.duration
    keep_frames = cfg.keep_frames
    elastic_from_start = cfg.mode == "elastic"

    counts = {"measurements": 0, "pulses": 0, "segments": 0, "telemetry": 0,
              "ticks": 0, "arrivals": 0}
    next_m = [node.t0_int + 1 for node in nodes]  # first localtick after the trigger
    gen = [0] * len(nodes)

    heap: list[tuple[float, int, int, int, int]] = []

    def time_of_phase(node: NodeRuntime, phase: float) -> float:
        return node.seg_t[-1] + (phase - node.seg_p[-1]) / node.seg_w[-1]

    def push_tick(node: NodeRuntime) -> None:
        heap.append((time_of_phase(node, next_m[node.idx]), PRIO_TICK,
                     node.idx, next_m[node.idx], gen[node.idx]))

    # Preload: elastic buffers start at eb_init with the most recent
    # pre-trigger arrivals; frames still in flight at the trigger are
    # scheduled as ordinary arrivals.
    for li, fq in enumerate(fqs):
        run = fq.run
        sender = nodes[run.src]
        w0 = sender.seg_w[0]
        floor_sender = int((sender.seg_p[0] + (-run.latency - sender.seg_t[0]) * w0) // 1)
        if elastic_from_start:
            first = floor_sender - cfg.eb_init + 1
            for rank, n in enumerate(range(first, floor_sender + 1)):
                fq.queue.append((rank, n))
                fq.recent.append((rank, n))
            fq.arrivals = cfg.eb_init
        for n in range(floor_sender + 1, sender.t0_int + 1):
            t_send = sender.seg_t[0] + (n - sender.seg_p[0]) / w0
            heap.append((t_send + run.latency, PRIO_ARRIVE, li, n, 0))

    heap.append((0.0, PRIO_TELEM, -1, 0, 0))
    for node in nodes:
        heap.append((0.0, PRIO_MEASURE, node.idx, 0, 0))
        push_tick(node)
    if cfg.mode == "ddc_then_reframe":
        heap.append((cfg.reframe_at, PRIO_REFRAME, -1, 0, 0))
    heapq.heapify(heap)

    def emit(fq: _FrameQueue, send_tick: int, recv_tick: int, era: int) -> None:
        hist = fq.hists[era]
        delta = recv_tick - send_tick
        hist[delta] = hist.get(delta, 0) + 1
        if keep_frames:
            tel.frames.append((fq.run.src, fq.run.dst, send_tick, recv_tick))

    def arrive(fq: _FrameQueue, send_tick: int, t: float) -> None:
        counts["arrivals"] += 1
        rank = fq.arrivals
        fq.arrivals += 1
        fq.recent.append((rank, send_tick))
        if fq.run.eb:
            if len(fq.queue) >= depth:
                raise SimulationFault("eb-overflow",
                                      f"arrival into full buffer (depth {depth})",
                                      t=t, node=fq.run.dst, link=(fq.run.src, fq.run.dst))
            fq.queue.append((rank, send_tick))
        elif rank in fq.pending:
            emit(fq, send_tick, fq.pending.pop(rank), 0)
        else:
            fq.queue.append((rank, send_tick))

    def pop(fq: _FrameQueue, m: int, t: float) -> None:
        fq.ticks += 1
        if fq.run.eb:
            if not fq.queue:
                raise SimulationFault("eb-underflow", "pop from empty buffer",
                                      t=t, node=fq.run.dst, link=(fq.run.src, fq.run.dst))
            rank, send_tick = fq.queue.popleft()
            fq.pop_rank = rank + 1
            emit(fq, send_tick, m, fq.era)
        else:
            rank = fq.pop_rank
            fq.pop_rank += 1
            if fq.queue:
                head_rank, send_tick = fq.queue.popleft()
                assert head_rank == rank
                emit(fq, send_tick, m, fq.era)
            else:
                fq.pending[rank] = m

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
        # the pending tick event was computed under the old frequency
        gen[node.idx] += 1
        heapq.heappush(heap, (time_of_phase(node, next_m[node.idx]), PRIO_TICK,
                              node.idx, next_m[node.idx], gen[node.idx]))

    while heap:
        t, prio, a, b, c = heapq.heappop(heap)
        if t > duration:
            break

        if prio == PRIO_ARRIVE:
            arrive(fqs[a], b, t)

        elif prio == PRIO_TICK:
            if c != gen[a] or b != next_m[a]:
                continue  # superseded by an actuation reschedule
            counts["ticks"] += 1
            node = nodes[a]
            for li in in_links[a]:
                pop(fqs[li], b, t)
            for li in out_links[a]:
                heapq.heappush(heap, (t + links[li].latency, PRIO_ARRIVE, li, b, 0))
            next_m[a] = b + 1
            heapq.heappush(heap, (time_of_phase(node, b + 1), PRIO_TICK, a, b + 1, gen[a]))

        elif prio == PRIO_MEASURE:
            node = nodes[a]
            counts["measurements"] += 1
            total_beta = 0
            n_links = 0
            for li in in_links[a]:
                total_beta += fqs[li].occupancy()
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
                target = (node.t0_int + node.k * p) + node.frac
                heapq.heappush(heap, (time_of_phase(node, target), PRIO_MEASURE, a, 0, 0))
            else:
                node.pend_dir = direction
                target = (node.t0_int + node.k * p + d) + node.frac
                heapq.heappush(heap, (time_of_phase(node, target), PRIO_ACTUATE, a, 0, 0))

        elif prio == PRIO_ACTUATE:
            node = nodes[a]
            actuate(node, t, node.pend_dir)
            node.k += 1
            target = (node.t0_int + node.k * p) + node.frac
            heapq.heappush(heap, (time_of_phase(node, target), PRIO_MEASURE, a, 0, 0))

        elif prio == PRIO_TELEM:
            counts["telemetry"] += 1
            for node in nodes:
                w = node.seg_w[-1]
                ppm = (w / nominal - 1.0) * 1e6
                tel.freq.append((t, node.idx, ppm, node.c_est, node.net))
            for fq in fqs:
                tel.occupancy.append((t, fq.run.dst, fq.run.src, fq.occupancy(),
                                      "eb" if fq.run.eb else "ddc"))
            t_next = t + cfg.telemetry_cadence
            if t_next < duration:
                heapq.heappush(heap, (t_next, PRIO_TELEM, -1, 0, 0))

        else:  # PRIO_REFRAME
            for fq in fqs:
                run = fq.run
                ddc_value = fq.arrivals - fq.ticks
                delta = cfg.eb_init - ddc_value
                run.lam_data = run.lam_ctrl + delta
                run.eb = True
                keep_from = fq.arrivals - cfg.eb_init
                fq.queue = deque((rank, n) for rank, n in fq.recent if rank >= keep_from)
                assert len(fq.queue) == cfg.eb_init
                fq.pop_rank = keep_from
                fq.pending.clear()
                fq.era = 1
                fq.hists.append({})
                tel.reframes.append(ReframeRecord(
                    t=t, node=run.dst, src=run.src, ddc_value=ddc_value,
                    lambda_delta=delta, recv_tick_boundary=next_m[run.dst] - 1))

    for fq in fqs:
        run = fq.run
        tel.lambdas[(run.src, run.dst)] = run.lam_data if run.eb else run.lam_ctrl
        tel.ledger[(run.src, run.dst)] = fq.hists
    tel.event_counts = counts
    return tel
