"""Published WSN topology: generation, persistence and graph queries.

Sensors are numbered ``1..n``; id ``0`` is reserved for the gateway and never
appears in a graph. Graphs are immutable once built.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import DisconnectedTopology, NoSuchSensor, Unreachable

GATEWAY = 0
ID_BITS = 16
MAX_GENERATION_ATTEMPTS = 100
DEFAULT_RADIO_RANGE = 30.0  # meters, Imote2 antenna reach
DEFAULT_MEAN_DEGREE = 12.0


@dataclass(frozen=True)
class TopologyGraph:
    n: int
    positions: Tuple[Tuple[float, float], ...]  # index i holds sensor i+1
    adjacency: Tuple[Tuple[int, ...], ...]  # index i holds sorted neighbors of sensor i+1
    gateway_reachable: FrozenSet[int] = field(default=frozenset())

    def __post_init__(self):
        if not self.gateway_reachable:
            object.__setattr__(self, "gateway_reachable", frozenset(range(1, self.n + 1)))

    @property
    def ids(self) -> range:
        return range(1, self.n + 1)

    def __contains__(self, sid: object) -> bool:
        return isinstance(sid, (int, np.integer)) and 1 <= sid <= self.n

    def position(self, sid: int) -> Tuple[float, float]:
        _check(self, sid)
        return self.positions[sid - 1]

    def edges(self) -> List[Tuple[int, int]]:
        out = []
        for a in self.ids:
            for b in self.adjacency[a - 1]:
                if a < b:
                    out.append((a, b))
        return out

    @property
    def edge_count(self) -> int:
        return sum(len(nb) for nb in self.adjacency) // 2

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "nodes": [{"id": i + 1, "x": x, "y": y} for i, (x, y) in enumerate(self.positions)],
            "edges": [list(e) for e in self.edges()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "TopologyGraph":
        n = int(data["n"])
        nodes = sorted(data["nodes"], key=lambda d: d["id"])
        if [d["id"] for d in nodes] != list(range(1, n + 1)):
            raise ValueError("topology ids must be exactly 1..n")
        positions = tuple((float(d["x"]), float(d["y"])) for d in nodes)
        return from_edges(n, positions, [tuple(e) for e in data["edges"]])

    @classmethod
    def from_json(cls, text: str) -> "TopologyGraph":
        return cls.from_dict(json.loads(text))


def _check(g: TopologyGraph, sid: int) -> None:
    if sid not in g:
        raise NoSuchSensor(f"sensor {sid} not in topology of {g.n} sensors")


def from_edges(n: int, positions: Sequence[Tuple[float, float]],
               edges: Iterable[Tuple[int, int]]) -> TopologyGraph:
    adj: List[set] = [set() for _ in range(n)]
    for a, b in edges:
        a, b = int(a), int(b)
        if a == b:
            raise ValueError(f"self-loop on sensor {a}")
        if not (1 <= a <= n and 1 <= b <= n):
            raise NoSuchSensor(f"edge ({a}, {b}) references unknown sensor")
        adj[a - 1].add(b)
        adj[b - 1].add(a)
    return TopologyGraph(n, tuple(tuple(p) for p in positions), tuple(tuple(sorted(s)) for s in adj))


def is_connected(g: TopologyGraph) -> bool:
    if g.n == 0:
        return False
    return len(_bfs_distances(g, 1)) == g.n


def default_side(n: int, radio_range: float = DEFAULT_RADIO_RANGE,
                 mean_degree: float = DEFAULT_MEAN_DEGREE) -> float:
    """Square side length giving roughly ``mean_degree`` neighbors per sensor."""
    return radio_range * math.sqrt(math.pi * n / mean_degree)


def grid_topology(rows: int, cols: int, spacing: float = DEFAULT_RADIO_RANGE) -> TopologyGraph:
    n = rows * cols
    if rows < 1 or cols < 1 or n < 4:
        raise ValueError("grid needs at least 4 sensors")
    positions = [(c * spacing, r * spacing) for r in range(rows) for c in range(cols)]
    edges = []
    for r in range(rows):
        for c in range(cols):
            sid = r * cols + c + 1
            if c + 1 < cols:
                edges.append((sid, sid + 1))
            if r + 1 < rows:
                edges.append((sid, sid + cols))
    return from_edges(n, positions, edges)


def rgg_positions(n: int, side: float, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, side, size=(n, 2))


def rgg_edges(positions: np.ndarray, radio_range: float) -> List[Tuple[int, int]]:
    """All sensor pairs at Euclidean distance <= radio_range (1-based ids)."""
    pairs = cKDTree(positions).query_pairs(radio_range, output_type="ndarray")
    return sorted((int(a) + 1, int(b) + 1) for a, b in pairs)


def random_geometric_topology(n: int, side: Optional[float] = None,
                              radio_range: float = DEFAULT_RADIO_RANGE,
                              seed: int = 0, min_degree: int = 1) -> TopologyGraph:
    """Uniform placement in a ``side`` x ``side`` square, resampled until connected.

    ``min_degree=2`` additionally rejects graphs with a leaf, which can never sit
    strictly inside a route.
    """
    if n < 4:
        raise ValueError("need n >= 4")
    if radio_range <= 0:
        raise ValueError("radio range must be positive")
    if side is None:
        side = default_side(n, radio_range)
    rng = np.random.default_rng(seed)
    for _ in range(MAX_GENERATION_ATTEMPTS):
        pos = rgg_positions(n, side, rng)
        g = from_edges(n, [tuple(map(float, p)) for p in pos], rgg_edges(pos, radio_range))
        if min(len(a) for a in g.adjacency) >= min_degree and is_connected(g):
            return g
    raise DisconnectedTopology(
        f"no connected graph (min degree {min_degree}) for n={n}, side={side}, range={radio_range} "
        f"after {MAX_GENERATION_ATTEMPTS} attempts")


def generate_topology(kind: str = "random-geometric", *, n: int = 100, side: Optional[float] = None,
                      radio_range: float = DEFAULT_RADIO_RANGE, rows: int = 0, cols: int = 0,
                      seed: int = 0) -> TopologyGraph:
    if kind == "grid":
        return grid_topology(rows, cols)
    if kind in ("random-geometric", "rgg"):
        return random_geometric_topology(n, side, radio_range, seed)
    raise ValueError(f"unknown topology kind {kind!r}")


def neighbors(g: TopologyGraph, sid: int) -> FrozenSet[int]:
    _check(g, sid)
    return frozenset(g.adjacency[sid - 1])


def _bfs_distances(g: TopologyGraph, source: int) -> Dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in g.adjacency[u - 1]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def shortest_path(g: TopologyGraph, a: int, b: int) -> List[int]:
    """Minimal-hop path from a to b, inclusive; ties go to the smallest next id."""
    _check(g, a)
    _check(g, b)
    dist = _bfs_distances(g, b)
    if a not in dist:
        raise Unreachable(f"{b} unreachable from {a}")
    path = [a]
    while path[-1] != b:
        here = dist[path[-1]]
        path.append(min(v for v in g.adjacency[path[-1] - 1] if dist.get(v) == here - 1))
    return path


def hop_count(g: TopologyGraph, a: int, b: int) -> int:
    return len(shortest_path(g, a, b)) - 1
