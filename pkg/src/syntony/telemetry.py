"""Run telemetry containers and the pinned CSV schemas.

Floats are written with repr() (shortest round-trip form) so that parsing
an emitted CSV reproduces the in-memory values exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

FREQ_HEADER = ["t_seconds", "node", "freq_offset_ppm", "c_est_ppm", "net_steps"]
BUFFERS_HEADER = ["t_seconds", "node", "src_node", "occupancy_frames", "mode"]
LATENCY_HEADER = ["node", "link_index", "peer", "lambda_out", "lambda_in", "rtt"]


@dataclass(frozen=True)
class ReframeRecord:
    t: float
    node: int            # receiving node owning the buffer
    src: int
    ddc_value: int       # virtual occupancy at the switch-over
    lambda_delta: int
    recv_tick_boundary: int  # receiver localtick count at the switch-over


@dataclass
class Telemetry:
    nominal_hz: float
    mode: str
    duration: float
    seed: int
    n_nodes: int
    freq: list[tuple[float, int, float, float, int]] = field(default_factory=list)
    occupancy: list[tuple[float, int, int, int, str]] = field(default_factory=list)
    lambdas: dict[tuple[int, int], int] = field(default_factory=dict)
    lambdas_initial: dict[tuple[int, int], int] = field(default_factory=dict)
    # per directed link, one {recv_tick - send_tick: count} histogram per era
    # (a reframe starts a new era); filled by the frame-level oracle only
    ledger: dict[tuple[int, int], list[dict[int, int]]] = field(default_factory=dict)
    frames: list[tuple[int, int, int, int]] = field(default_factory=list)
    reframes: list[ReframeRecord] = field(default_factory=list)
    pulses: list[tuple[float, int, int]] = field(default_factory=list)
    event_counts: dict[str, int] = field(default_factory=dict)

    def nodes(self) -> list[int]:
        return list(range(self.n_nodes))

    def freq_trace(self, column: str = "freq_offset_ppm") -> dict[int, tuple[list[float], list[float]]]:
        """Per-node (times, values) series from the frequency samples."""
        col = {"freq_offset_ppm": 2, "c_est_ppm": 3, "net_steps": 4}[column]
        out: dict[int, tuple[list[float], list[float]]] = {n: ([], []) for n in range(self.n_nodes)}
        for row in self.freq:
            ts, vs = out[row[1]]
            ts.append(row[0])
            vs.append(float(row[col]))
        return out


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def write_freq_csv(path: Path | str, tel: Telemetry) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FREQ_HEADER)
        for t, node, ppm, c_est, net in tel.freq:
            w.writerow([_fmt(t), node, _fmt(ppm), _fmt(c_est), net])


def write_buffers_csv(path: Path | str, tel: Telemetry) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BUFFERS_HEADER)
        for t, node, src, occ, mode in tel.occupancy:
            w.writerow([_fmt(t), node, src, occ, mode])


def write_latency_csv(path: Path | str, tel: Telemetry) -> None:
    by_dst: dict[int, list[int]] = {}
    for src, dst in sorted(tel.lambdas):
        by_dst.setdefault(dst, []).append(src)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LATENCY_HEADER)
        for node in sorted(by_dst):
            for index, peer in enumerate(sorted(by_dst[node]), start=1):
                lam_in = tel.lambdas[(peer, node)]
                lam_out = tel.lambdas.get((node, peer))
                if lam_out is None:
                    continue
                w.writerow([node, index, peer, lam_out, lam_in, lam_out + lam_in])


def read_freq_csv(path: Path | str) -> list[tuple[float, int, float, float, int]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != FREQ_HEADER:
            raise ValueError(f"unexpected freq.csv header {header}")
        for t, node, ppm, c_est, net in reader:
            rows.append((float(t), int(node), float(ppm), float(c_est), int(net)))
    return rows


def read_buffers_csv(path: Path | str) -> list[tuple[float, int, int, int, str]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != BUFFERS_HEADER:
            raise ValueError(f"unexpected buffers.csv header {header}")
        for t, node, src, occ, mode in reader:
            rows.append((float(t), int(node), int(src), int(occ), mode))
    return rows


def read_latency_csv(path: Path | str) -> list[tuple[int, int, int, int, int, int]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != LATENCY_HEADER:
            raise ValueError(f"unexpected latency.csv header {header}")
        for row in reader:
            rows.append(tuple(int(x) for x in row))
    return rows


def freq_traces_from_csv(path: Path | str) -> dict[int, tuple[list[float], list[float]]]:
    out: dict[int, tuple[list[float], list[float]]] = {}
    for t, node, ppm, _c_est, _net in read_freq_csv(path):
        ts, vs = out.setdefault(node, ([], []))
        ts.append(t)
        vs.append(ppm)
    return out
