"""Directed network graphs with per-direction physical link latencies.

Generators always emit both directions of every connection (the hardware
links are bidirectional), but each direction is an independent record and
may carry its own latency: asymmetric links are legal.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import product

from .errors import ConfigError

DEFAULT_LATENCY_S = 1e-8  # 2 m of cable at ~2e8 m/s


@dataclass(frozen=True)
class Link:
    src: int
    dst: int
    latency: float  # seconds, strictly positive


@dataclass(frozen=True)
class Topology:
    n_nodes: int
    links: tuple[Link, ...]
    name: str = "custom"
    partition: tuple[tuple[int, ...], ...] = field(default=())

    def link_map(self) -> dict[tuple[int, int], float]:
        return {(lk.src, lk.dst): lk.latency for lk in self.links}

    def in_neighbors(self, node: int) -> list[int]:
        return sorted(lk.src for lk in self.links if lk.dst == node)

    def out_neighbors(self, node: int) -> list[int]:
        return sorted(lk.dst for lk in self.links if lk.src == node)


def complete(n: int, latency: float = DEFAULT_LATENCY_S) -> Topology:
    if n < 2:
        raise ConfigError(f"complete topology needs n >= 2, got {n}")
    links = tuple(Link(i, j, latency) for i in range(n) for j in range(n) if i != j)
    return Topology(n, links, name=f"complete{n}")


def hourglass(latency: float = DEFAULT_LATENCY_S) -> Topology:
    """Two K4 cliques on nodes 0-3 and 4-7 joined by the single bridge 3<->4."""
    pairs = [(i, j) for a in (range(4), range(4, 8))
             for i in a for j in a if i < j]
    pairs.append((3, 4))
    links = []
    for i, j in pairs:
        links.append(Link(i, j, latency))
        links.append(Link(j, i, latency))
    return Topology(8, tuple(links), name="hourglass",
                    partition=(tuple(range(4)), tuple(range(4, 8))))


def cube(latency: float = DEFAULT_LATENCY_S) -> Topology:
    """The 3-hypercube on 8 nodes: i and j adjacent iff i^j has one set bit."""
    links = tuple(Link(i, j, latency) for i in range(8) for j in range(8)
                  if (i ^ j).bit_count() == 1)
    return Topology(8, links, name="cube")


def torus(dims: tuple[int, ...], latency: float = DEFAULT_LATENCY_S) -> Topology:
    if not dims or any(k < 2 for k in dims):
        raise ConfigError(f"torus dims must be nonempty with every k >= 2, got {dims}")
    grid = list(product(*(range(k) for k in dims)))
    index = {coord: i for i, coord in enumerate(grid)}
    pairs = set()
    for coord in grid:
        for axis, k in enumerate(dims):
            for step in (1, -1):
                nb = list(coord)
                nb[axis] = (nb[axis] + step) % k
                a, b = index[coord], index[tuple(nb)]
                if a != b:
                    pairs.add((min(a, b), max(a, b)))  # k=2 rings dedupe here
    links = []
    for a, b in sorted(pairs):
        links.append(Link(a, b, latency))
        links.append(Link(b, a, latency))
    name = "torus" + "x".join(str(k) for k in dims)
    return Topology(len(grid), tuple(links), name=name)


_GENERATORS = {"complete", "hourglass", "cube", "torus"}


def generate(kind: str, *, n: int | None = None, dims: tuple[int, ...] | None = None,
             default_latency: float = DEFAULT_LATENCY_S) -> Topology:
    if kind == "complete":
        if n is None:
            raise ConfigError("complete topology requires n")
        return complete(n, default_latency)
    if kind == "hourglass":
        return hourglass(default_latency)
    if kind == "cube":
        return cube(default_latency)
    if kind == "torus":
        if not dims:
            raise ConfigError("torus topology requires dims")
        return torus(tuple(dims), default_latency)
    raise ConfigError(f"unknown topology kind {kind!r} (expected one of {sorted(_GENERATORS)})")


def set_link_latency(topo: Topology, src: int, dst: int, latency: float) -> Topology:
    """Return a copy with the latency of the single direction src->dst replaced."""
    if (src, dst) not in topo.link_map():
        raise ConfigError(f"no link {src}->{dst} in topology {topo.name}")
    links = tuple(Link(lk.src, lk.dst, latency) if (lk.src, lk.dst) == (src, dst) else lk
                  for lk in topo.links)
    return Topology(topo.n_nodes, links, name=topo.name, partition=topo.partition)


def from_links(n_nodes: int, records: list[tuple[int, int, float]], name: str = "explicit") -> Topology:
    return Topology(n_nodes, tuple(Link(s, d, l) for s, d, l in records), name=name)


def validate(topo: Topology) -> tuple[list[str], list[str]]:
    """Return (errors, warnings). An empty error list means the topology is usable."""
    errors: list[str] = []
    warnings: list[str] = []
    seen = set()
    adjacency: dict[int, set[int]] = {i: set() for i in range(topo.n_nodes)}
    for lk in topo.links:
        if not (0 <= lk.src < topo.n_nodes and 0 <= lk.dst < topo.n_nodes):
            errors.append(f"link {lk.src}->{lk.dst} has endpoint outside [0, {topo.n_nodes})")
            continue
        if lk.src == lk.dst:
            errors.append(f"self-loop at node {lk.src}")
            continue
        if lk.latency <= 0:
            errors.append(f"non-positive latency on {lk.src}->{lk.dst}: {lk.latency}")
        if (lk.src, lk.dst) in seen:
            errors.append(f"duplicate link {lk.src}->{lk.dst}")
        seen.add((lk.src, lk.dst))
        adjacency[lk.src].add(lk.dst)
        adjacency[lk.dst].add(lk.src)
    for src, dst in sorted(seen):
        if (dst, src) not in seen:
            warnings.append(f"link {src}->{dst} has no reverse direction")
    if topo.n_nodes > 1:
        reached = {0}
        frontier = deque([0])
        while frontier:
            for nb in adjacency[frontier.popleft()]:
                if nb not in reached:
                    reached.add(nb)
                    frontier.append(nb)
        if len(reached) < topo.n_nodes:
            errors.append(f"graph is disconnected ({len(reached)} of {topo.n_nodes} nodes reachable from 0)")
    return errors, warnings
