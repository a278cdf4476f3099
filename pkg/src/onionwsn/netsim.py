"""Deterministic hop-by-hop simulation of queries, with energy accounting and
an honest-but-curious adversary (the gateway plus ``z`` infected sensors).
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from ._rng import derive_seed
from .crypto import KeyPair, keygen
from .errors import OnionWSNError, PacketOverflow, RecoveryMismatch, TooManyInfected
from .node import SensorState, process_query, sample_reading
from .onion import (TINYOS_OVERHEAD, TINYOS_PACKET, ProtocolParams, Query, Reading, RoutePlan,
                    build_query, peel_layer, recover_reading, select_overlay_path, select_path)
from .topology import GATEWAY, TopologyGraph, generate_topology, shortest_path


@dataclass(frozen=True)
class EnergyParams:
    """Per-operation costs in mJ (Imote2 / CC2420 figures)."""
    ecc_decrypt_mJ: float = 13.73
    sym_mJ: float = 1.0
    rx_mJ: float = 123.0
    tx_mJ: float = 114.0

    def __post_init__(self):
        if min(self.ecc_decrypt_mJ, self.sym_mJ, self.rx_mJ, self.tx_mJ) < 0:
            raise ValueError("energy costs must be nonnegative")

    @property
    def processing_mJ(self) -> float:
        return self.ecc_decrypt_mJ + self.sym_mJ

    @property
    def onion_hop_mJ(self) -> float:
        return self.rx_mJ + self.processing_mJ + self.tx_mJ


@dataclass(frozen=True)
class SimConfig:
    topology: str = "random-geometric"
    n: int = 100
    side: Optional[float] = None
    radio_range: float = 30.0
    rows: int = 0
    cols: int = 0
    t: int = 12
    reading_bits: int = 16
    id_bits: int = 16
    packet_limit: str = "enforce-128"
    mode: str = "basic"
    z: int = 0
    seed: int = 0
    group: str = "secp160r1"
    header_len: Optional[int] = None
    adversary: str = "eq3"

    def __post_init__(self):
        if self.t < 2:
            raise ValueError("t must be >= 2")
        if self.packet_limit not in ("enforce-128", "abstract"):
            raise ValueError(f"unknown packet limit {self.packet_limit!r}")
        if self.mode not in ("basic", "overlay"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.adversary not in ("eq3", "strong"):
            raise ValueError(f"unknown adversary mode {self.adversary!r}")
        if not 1 <= self.id_bits <= 16:
            raise ValueError("next-hop field is 2 bytes; id_bits must be in 1..16")
        if self.z < 0:
            raise TooManyInfected("z must be >= 0")

    @property
    def sensor_count(self) -> int:
        return self.rows * self.cols if self.topology == "grid" else self.n

    def protocol(self) -> ProtocolParams:
        return ProtocolParams(self.t, self.group, self.reading_bits, self.header_len)

    def build_topology(self) -> TopologyGraph:
        return generate_topology(self.topology, n=self.n, side=self.side,
                                 radio_range=self.radio_range, rows=self.rows, cols=self.cols,
                                 seed=derive_seed(self.seed, "topology"))


@dataclass(frozen=True)
class Observation:
    observer: int
    learned: int  # next onion hop, or GATEWAY
    deposited: Optional[bool]  # slot != 0 as read from the layer; None for relays
    kind: str = "onion"  # "onion" or "relay"


@dataclass
class AdversaryState:
    infected: FrozenSet[int]
    keys: Dict[int, KeyPair] = field(default_factory=dict, repr=False)
    observations: List[List[Observation]] = field(default_factory=list)
    known: List[FrozenSet[int]] = field(default_factory=list)

    def record(self, observations: Sequence[Observation]) -> FrozenSet[int]:
        k = known_nodes(observations)
        self.observations.append(list(observations))
        self.known.append(k)
        return k


@dataclass(frozen=True)
class AdversaryView:
    """What the adversary holds after one query: infected-sensor observations
    plus the two sensors the gateway exchanged packets with."""
    observations: Tuple[Observation, ...]
    gateway_endpoints: Tuple[int, int]


@dataclass(frozen=True)
class HopEvent:
    hop: int
    sender: int
    receiver: int
    packet: bytes = field(repr=False)
    header_len: int
    body_len: int
    energy_mJ: float

    def to_dict(self) -> dict:
        return {"hop": self.hop, "from": self.sender, "to": self.receiver,
                "header_len": self.header_len, "body_len": self.body_len,
                "energy_mJ": round(self.energy_mJ, 6)}


@dataclass
class Transcript:
    mode: str
    target: int
    plan: RoutePlan
    events: List[HopEvent]
    processed: List[int]
    observations: List[Observation]
    known: FrozenSet[int]
    energy: Dict[int, float]
    final: Query
    recovered: Reading
    expected: Reading

    @property
    def ephemeral(self) -> bytes:
        return self.plan.ephemeral.encoded

    def view(self) -> AdversaryView:
        return AdversaryView(tuple(self.observations),
                             (self.events[0].receiver, self.events[-1].sender))

    def known_interior(self) -> int:
        return sum(1 for s in self.plan.path[1:-1] if s in self.known)

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "target": self.target,
            "route": list(self.plan.path),
            "hops": len(self.events),
            "recovered": self.recovered.value,
            "expected": self.expected.value,
            "total_energy_mJ": round(sum(self.energy.values()), 6),
            "adversary": {
                "observations": [[o.observer, o.learned, o.kind] for o in self.observations],
                "known": sorted(self.known),
                "known_interior": self.known_interior(),
            },
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(e.to_dict(), sort_keys=True) for e in self.events]
        lines.append(json.dumps({"summary": self.summary()}, sort_keys=True))
        return "\n".join(lines) + "\n"


def known_nodes(observations: Sequence[Observation]) -> FrozenSet[int]:
    """Infected onion nodes plus every sensor some infected node learned."""
    known = set()
    for o in observations:
        if o.kind == "onion":
            known.add(o.observer)
        if o.learned != GATEWAY:
            known.add(o.learned)
    return frozenset(known)


def observe_route(plan: RoutePlan, infected: FrozenSet[int], g: Optional[TopologyGraph] = None,
                  mode: str = "basic") -> List[Observation]:
    """Observations implied by the known-node rule, without running any crypto.

    Infected onion nodes learn their successor; in overlay mode infected relays
    strictly inside a segment learn the segment's destination.
    """
    out = []
    last = len(plan.path) - 1
    for j, s in enumerate(plan.path):
        nxt = plan.successor(j)
        if s in infected:
            out.append(Observation(s, nxt, plan.slots[j] != 0))
        if mode == "overlay" and j < last:
            for relay in shortest_path(g, s, nxt)[1:-1]:
                if relay in infected:
                    out.append(Observation(relay, nxt, None, "relay"))
    return out


def infect(cfg: SimConfig, seed: int, sensors: Optional[Mapping[int, SensorState]] = None,
           n: Optional[int] = None) -> AdversaryState:
    """Uniformly choose ``cfg.z`` sensors without replacement and capture their keys."""
    n = cfg.sensor_count if n is None else n
    if cfg.z > n:
        raise TooManyInfected(f"z={cfg.z} exceeds n={n}")
    infected = frozenset(random.Random(seed).sample(range(1, n + 1), cfg.z))
    keys = {s: sensors[s].keypair for s in infected} if sensors else {}
    return AdversaryState(infected, keys)


def candidate_set(adv: AdversaryState, g: TopologyGraph, view: AdversaryView,
                  strong: bool = False) -> FrozenSet[int]:
    """Sensors the adversary cannot rule out as the target.

    Infected sensors are excluded unless they deposited a reading on the route.
    ``strong`` also drops the two endpoints the gateway saw.
    """
    depositors = {o.observer for o in view.observations if o.kind == "onion" and o.deposited}
    cands = (set(g.ids) - adv.infected) | depositors
    if strong:
        cands -= set(view.gateway_endpoints)
    return frozenset(cands)


def adversary_guess(adv: AdversaryState, g: TopologyGraph, view: AdversaryView,
                    rng: random.Random, strong: bool = False) -> int:
    """Uniform guess over ``candidate_set`` without materializing it."""
    depositors = sorted({o.observer for o in view.observations
                         if o.kind == "onion" and o.deposited})
    excluded = adv.infected
    if strong:
        excluded = excluded | set(view.gateway_endpoints)
    depositors = [s for s in depositors if not (strong and s in view.gateway_endpoints)]
    clean = g.n - len(excluded)
    i = rng.randrange(clean + len(depositors))
    if i < len(depositors):
        return depositors[i]
    while True:
        s = rng.randint(1, g.n)
        if s not in excluded:
            return s


def energy_cost(transcript: Transcript, params: EnergyParams = EnergyParams()) -> Dict[int, float]:
    """Per-sensor energy (mJ): rx/tx per link traversal, plus one ECC and one
    symmetric operation per query processed."""
    cost: Dict[int, float] = {}
    for e in transcript.events:
        if e.sender != GATEWAY:
            cost[e.sender] = cost.get(e.sender, 0.0) + params.tx_mJ
        if e.receiver != GATEWAY:
            cost[e.receiver] = cost.get(e.receiver, 0.0) + params.rx_mJ
    for s in transcript.processed:
        cost[s] = cost.get(s, 0.0) + params.processing_mJ
    return cost


def flood_energy(n: int, params: EnergyParams = EnergyParams()) -> float:
    """Baseline of reading every sensor: each receives and transmits once."""
    return n * (params.rx_mJ + params.tx_mJ)


class Simulator:
    """One network instance: topology, sensor keys and an infected set."""

    def __init__(self, cfg: SimConfig, graph: Optional[TopologyGraph] = None):
        self.cfg = cfg
        self.graph = graph if graph is not None else cfg.build_topology()
        n = self.graph.n
        if n >= (1 << cfg.id_bits):
            raise ValueError(f"{n} sensors do not fit in {cfg.id_bits}-bit ids")
        self.params = cfg.protocol()
        self.energy_params = EnergyParams()
        self.sensors = {
            i: SensorState(i, keygen(derive_seed(cfg.seed, "key", i), cfg.group),
                           derive_seed(cfg.seed, "reading", i))
            for i in self.graph.ids
        }
        self.publics = {i: s.keypair.public for i, s in self.sensors.items()}
        self.adversary = infect(cfg, derive_seed(cfg.seed, "infect"), self.sensors, n)

    def _check_size(self, q: Query) -> None:
        if self.cfg.packet_limit == "enforce-128":
            size = len(q.to_bytes()) + TINYOS_OVERHEAD
            if size > TINYOS_PACKET:
                raise PacketOverflow(f"packet of {size} bytes exceeds {TINYOS_PACKET}")

    def plan(self, target: int, seed: int, mode: Optional[str] = None) -> RoutePlan:
        mode = mode or self.cfg.mode
        rng = random.Random(derive_seed(seed, "plan"))
        if mode == "overlay":
            return select_overlay_path(self.graph, target, self.cfg.t, rng)
        return select_path(self.graph, target, self.cfg.t, rng)

    def run_basic_query(self, target: int, seed: int = 0, tick: int = 0,
                        adversary: Optional[AdversaryState] = None) -> Transcript:
        return self.run_query(target, seed, tick, adversary, mode="basic")

    def run_overlay_query(self, target: int, seed: int = 0, tick: int = 0,
                          adversary: Optional[AdversaryState] = None) -> Transcript:
        return self.run_query(target, seed, tick, adversary, mode="overlay")

    def run_query(self, target: int, seed: int = 0, tick: int = 0,
                  adversary: Optional[AdversaryState] = None, mode: Optional[str] = None,
                  plan: Optional[RoutePlan] = None) -> Transcript:
        mode = mode or self.cfg.mode
        if target == GATEWAY or target not in self.graph:
            raise ValueError(f"target {target} is not a sensor")
        plan = plan or self.plan(target, seed, mode)
        keyed, query = build_query(plan, self.publics, self.params,
                                   random.Random(derive_seed(seed, "query")))
        return self._deliver(keyed, query, adversary or self.adversary,
                             random.Random(derive_seed(seed, "pad")), tick, mode)

    def _deliver(self, plan: RoutePlan, query: Query, adv: AdversaryState,
                 pad: random.Random, tick: int, mode: str) -> Transcript:
        ep = self.energy_params
        events: List[HopEvent] = []
        processed: List[int] = []
        observations: List[Observation] = []

        def send(sender: int, receiver: int, q: Query, processes: bool) -> None:
            self._check_size(q)
            energy = (ep.tx_mJ if sender != GATEWAY else 0.0) + \
                     (ep.rx_mJ if receiver != GATEWAY else 0.0) + \
                     (ep.processing_mJ if processes else 0.0)
            events.append(HopEvent(len(events), sender, receiver, q.to_bytes(),
                                   len(q.header), len(q.body), energy))

        current = plan.path[0]
        send(GATEWAY, current, query, True)
        q = query
        while True:
            if len(processed) > plan.t + 1:
                raise OnionWSNError("query did not return to the gateway")
            sensor = self.sensors[current]
            record, key = peel_layer(sensor.keypair, q, self.params)
            if current in adv.infected:
                # The adversary reads the layer with the captured key; packets are untouched.
                seen, _ = peel_layer(adv.keys.get(current, sensor.keypair), q, self.params)
                observations.append(Observation(current, seen.next_hop, seen.slot != 0))
            nxt, q = process_query(sensor, q, self.params, pad, tick, record, key)
            processed.append(current)
            if nxt == GATEWAY:
                send(current, GATEWAY, q, False)
                break
            if mode == "basic":
                if nxt not in self.graph.adjacency[current - 1]:
                    raise OnionWSNError(f"{current} -> {nxt} is not a radio link")
                send(current, nxt, q, True)
            else:
                segment = shortest_path(self.graph, current, nxt)
                for a, b in zip(segment, segment[1:]):
                    send(a, b, q, b == nxt)
                for relay in segment[1:-1]:
                    if relay in adv.infected:
                        observations.append(Observation(relay, nxt, None, "relay"))
            current = nxt

        recovered = recover_reading(plan, q, self.params)
        expected = sample_reading(self.sensors[plan.target], tick, self.params.reading_bits)
        if recovered != expected:
            raise RecoveryMismatch(f"recovered {recovered.value:#x}, expected {expected.value:#x}")
        known = adv.record(observations)
        tr = Transcript(mode, plan.target, plan, events, processed, observations, known,
                        {}, q, recovered, expected)
        tr.energy = energy_cost(tr, ep)
        return tr


def run_basic_query(cfg: SimConfig, target: int, seed: Optional[int] = None) -> Transcript:
    return Simulator(cfg).run_basic_query(target, cfg.seed if seed is None else seed)


def run_overlay_query(cfg: SimConfig, target: int, seed: Optional[int] = None) -> Transcript:
    return Simulator(cfg).run_overlay_query(target, cfg.seed if seed is None else seed)
