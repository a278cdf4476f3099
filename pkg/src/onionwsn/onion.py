"""Client side of the query protocol: path selection, query construction and
reading recovery.

Wire layout of a query (all integers big-endian)::

    R[eph] || C_0[header_len - eph] || body[t * reading_bits / 8]

Each decrypted header layer is ``magic(0xA5) || next_hop(2) || slot(1) || inner``.
The client trims 4 bytes after every layer encryption and each sensor re-pads
4 random bytes, so the header never changes size.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence, Tuple

from ._rng import SeedLike, as_rng
from .crypto import (HEADER_NONCE, ZERO_KEY, EphemeralPair, KeyPair, body_nonce, ephemeral,
                     get_group, keystream_xform, shared_key)
from .errors import (LayerAuthFailure, MalformedQuery, OnionTooSmall, PathSelectionStuck,
                     PoolUnderflow)
from .topology import GATEWAY, TopologyGraph

MAGIC = 0xA5
RECORD_LEN = 4
MAX_RESTARTS = 1000
FORWARD_RETRIES = 50
TINYOS_OVERHEAD = 13  # 11-byte header + 2-byte CRC
TINYOS_PACKET = 128


@dataclass(frozen=True)
class ProtocolParams:
    t: int
    group: str = "secp160r1"
    reading_bits: int = 16
    header_len: Optional[int] = None  # L_c in bytes; None -> smallest legal

    def __post_init__(self):
        if self.t < 2:
            raise ValueError("t must be >= 2")
        if self.t > 255:
            raise ValueError("slot index is one byte; t must be <= 255")
        if self.reading_bits <= 0 or self.reading_bits % 8:
            raise ValueError("reading_bits must be a positive multiple of 8")
        if self.header_len is None:
            object.__setattr__(self, "header_len", self.eph_len + RECORD_LEN * (self.t + 2))
        if self.nested_len < RECORD_LEN * (self.t + 2):
            raise OnionTooSmall(
                f"header of {self.header_len} bytes leaves {self.nested_len} nested bytes; "
                f"t={self.t} needs {RECORD_LEN * (self.t + 2)}")

    @property
    def eph_len(self) -> int:
        return get_group(self.group).element_len

    @property
    def nested_len(self) -> int:
        return self.header_len - self.eph_len

    @property
    def slot_bytes(self) -> int:
        return self.reading_bits // 8

    @property
    def body_len(self) -> int:
        return self.t * self.slot_bytes

    @property
    def query_len(self) -> int:
        return self.header_len + self.body_len

    @property
    def packet_len(self) -> int:
        """Query plus TinyOS framing."""
        return self.query_len + TINYOS_OVERHEAD


@dataclass(frozen=True)
class Reading:
    value: int
    bits: int = 16

    def __post_init__(self):
        if not 0 <= self.value < (1 << self.bits):
            raise ValueError(f"reading {self.value} does not fit in {self.bits} bits")


@dataclass(frozen=True)
class Query:
    header: bytes
    body: bytes

    def to_bytes(self) -> bytes:
        return self.header + self.body

    @classmethod
    def from_bytes(cls, data: bytes, params: ProtocolParams) -> "Query":
        if len(data) != params.query_len:
            raise MalformedQuery(f"query is {len(data)} bytes, expected {params.query_len}")
        return cls(bytes(data[:params.header_len]), bytes(data[params.header_len:]))

    def check(self, params: ProtocolParams) -> None:
        if len(self.header) != params.header_len or len(self.body) != params.body_len:
            raise MalformedQuery(
                f"sizes {len(self.header)}/{len(self.body)}, "
                f"expected {params.header_len}/{params.body_len}")


@dataclass(frozen=True)
class LayerRecord:
    magic: int
    next_hop: int
    slot: int
    inner: bytes

    def encode(self) -> bytes:
        return bytes([self.magic]) + self.next_hop.to_bytes(2, "big") + bytes([self.slot]) + self.inner

    @classmethod
    def decode(cls, data: bytes) -> "LayerRecord":
        return cls(data[0], int.from_bytes(data[1:3], "big"), data[3], bytes(data[RECORD_LEN:]))


@dataclass(frozen=True)
class RoutePlan:
    """Client secret for one query.

    ``path`` holds the t+2 sensors (gateway implicit at both ends), ``slots``
    the body slot for each path position with 0 at both endpoints.
    """
    path: Tuple[int, ...]
    v: int
    w: int
    slots: Tuple[int, ...]
    ephemeral: Optional[EphemeralPair] = None
    layer_keys: Tuple[bytes, ...] = field(default=(), repr=False)

    @property
    def t(self) -> int:
        return len(self.path) - 2

    @property
    def target(self) -> int:
        return self.path[self.v]

    @property
    def pi(self) -> Tuple[int, ...]:
        return self.slots[1:-1]

    @property
    def body_keys(self) -> Tuple[bytes, ...]:
        return tuple(k if s else ZERO_KEY for k, s in zip(self.layer_keys, self.slots))

    def successor(self, j: int) -> int:
        return self.path[j + 1] if j + 1 < len(self.path) else GATEWAY


def _random_slots(t: int, rng) -> Tuple[int, ...]:
    return (0, *rng.sample(range(1, t + 1), t), 0)


def select_path(g: TopologyGraph, target: int, t: int, seed: SeedLike = None,
                restart: str = "keep-position") -> RoutePlan:
    """Random loop-free walk of t+2 adjacent sensors with the target at a uniform
    position in 1..t.

    The backward part (positions 0..w) and the forward part (w+1..t+1) are
    grown by uniform neighbor choice. A looping forward part is redrawn up to
    FORWARD_RETRIES times; after that, or when the backward part loops, the
    selection restarts. With ``restart="redraw"`` a restart also redraws the
    target position, which biases it toward short backward walks, so by
    default the position is kept.
    """
    if target not in g:
        raise ValueError(f"target {target} not in topology")
    if t < 2:
        raise ValueError("t must be >= 2")
    if restart not in ("keep-position", "redraw"):
        raise ValueError(f"unknown restart policy {restart!r}")
    rng = as_rng(seed)
    adj = g.adjacency
    choice = rng.choice
    restarts = 0
    w = rng.randint(1, t)
    path = [0] * (t + 2)
    while restarts < MAX_RESTARTS:
        path[w] = target
        seen = {target}
        ok = True
        for j in range(w - 1, -1, -1):
            nxt = choice(adj[path[j + 1] - 1])
            if nxt in seen:
                ok = False
                break
            seen.add(nxt)
            path[j] = nxt
        if ok:
            for _ in range(FORWARD_RETRIES):
                taken = set(seen)
                for j in range(w + 1, t + 2):
                    nxt = choice(adj[path[j - 1] - 1])
                    if nxt in taken:
                        break
                    taken.add(nxt)
                    path[j] = nxt
                else:
                    return RoutePlan(tuple(path), w, w, _random_slots(t, rng))
        restarts += 1
        if restart == "redraw":
            w = rng.randint(1, t)
    raise PathSelectionStuck(f"no loop-free path of {t + 2} sensors through {target} "
                             f"after {MAX_RESTARTS} restarts")


def select_overlay_path(g: TopologyGraph, target: int, t: int, seed: SeedLike = None,
                        pool: Sequence[int] = (), c: int = 0) -> RoutePlan:
    """Onion nodes drawn uniformly from all sensors; adjacency not required.

    The t interior positions hold the target, ``c`` sensors drawn from
    ``pool`` and population draws; the two endpoints are population draws.
    """
    if target not in g:
        raise ValueError(f"target {target} not in topology")
    if g.n < t + 2:
        raise ValueError(f"overlay route of {t + 2} sensors needs n >= {t + 2}")
    if c < 0 or c > len(pool) or c > t - 1:
        raise PoolUnderflow(f"cannot draw c={c} from a pool of {len(pool)} with t={t}")
    rng = as_rng(seed)
    v = rng.randint(1, t)
    chosen = [target]
    if c:
        for s in rng.sample(sorted(pool), c):
            if s not in chosen:
                chosen.append(s)
    taken = set(chosen)

    def draw():
        while True:
            s = rng.randint(1, g.n)
            if s not in taken:
                taken.add(s)
                return s

    while len(chosen) < t:
        chosen.append(draw())
    others = chosen[1:]
    rng.shuffle(others)
    interior = others[:v - 1] + [target] + others[v - 1:]
    first, last = draw(), draw()
    return RoutePlan((first, *interior, last), v, v, _random_slots(t, rng))


def build_query(plan: RoutePlan, publics: Mapping[int, object], params: ProtocolParams,
                seed: SeedLike = None) -> Tuple[RoutePlan, Query]:
    """Build ``<OR_0, M_0>`` for ``plan``.

    Returns the plan extended with the ephemeral pair and per-hop keys (needed
    for recovery) together with the query.
    """
    t = plan.t
    if t != params.t:
        raise ValueError(f"plan has t={t}, params say t={params.t}")
    if len(set(plan.path)) != len(plan.path):
        raise ValueError("route repeats a sensor")
    rng = as_rng(seed)
    eph = ephemeral(rng, params.group)
    keys = tuple(shared_key(eph.r, publics[s], params.group) for s in plan.path)
    N = params.nested_len
    # Innermost padding fills the whole nested region.
    C = rng.randbytes(N)
    for j in range(t + 1, -1, -1):
        record = LayerRecord(MAGIC, plan.successor(j), plan.slots[j], C[:N - RECORD_LEN])
        C = keystream_xform(keys[j], HEADER_NONCE, record.encode())
    query = Query(eph.encoded + C, rng.randbytes(params.body_len))
    return replace(plan, ephemeral=eph, layer_keys=keys), query


def peel_layer(keypair: KeyPair, query: Query, params: ProtocolParams) -> Tuple[LayerRecord, bytes]:
    """Decrypt the outer header layer with ``keypair``; returns the record and layer key."""
    g = get_group(params.group)
    R = g.decode(query.header[:params.eph_len])
    key = shared_key(keypair.private, R, params.group)
    record = LayerRecord.decode(keystream_xform(key, HEADER_NONCE, query.header[params.eph_len:]))
    if record.magic != MAGIC:
        raise LayerAuthFailure("layer magic mismatch")
    return record, key


def recover_reading(plan: RoutePlan, final: Query, params: ProtocolParams) -> Reading:
    """Strip the t+2-v slot encryptions covering the target's reading."""
    if not plan.layer_keys:
        raise ValueError("plan carries no layer keys; use the plan returned by build_query")
    final.check(params)
    sb = params.slot_bytes
    pv = plan.slots[plan.v]
    block = final.body[(pv - 1) * sb:pv * sb]
    nonce = body_nonce(pv)
    keys = plan.body_keys
    for s in range(plan.t + 1, plan.v - 1, -1):
        block = keystream_xform(keys[s], nonce, block)
    return Reading(int.from_bytes(block, "big"), params.reading_bits)
