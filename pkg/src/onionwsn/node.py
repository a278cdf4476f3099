"""Sensor-side processing of a query (one hop of data collection)."""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Tuple

from .crypto import ZERO_KEY, KeyPair, body_nonce, keystream_xform
from .errors import LayerAuthFailure
from .onion import RECORD_LEN, LayerRecord, ProtocolParams, Query, Reading, peel_layer

__all__ = ["SensorState", "Reading", "sample_reading", "process_query"]


@dataclass(frozen=True)
class SensorState:
    id: int
    keypair: KeyPair
    reading_seed: int = 0


def sample_reading(sensor: SensorState, tick: int = 0, bits: int = 16) -> Reading:
    """Synthetic measurement: a keyed hash of (id, reading_seed, tick)."""
    h = hashlib.blake2b(digest_size=8, person=b"onionwsn-read")
    h.update(b"%d:%d:%d" % (sensor.id, sensor.reading_seed, tick))
    return Reading(int.from_bytes(h.digest(), "big") & ((1 << bits) - 1), bits)


def process_query(sensor: SensorState, query: Query, params: ProtocolParams,
                  rng: random.Random, tick: int = 0,
                  record: LayerRecord = None, key: bytes = None) -> Tuple[int, Query]:
    """Run one collection step; returns (next hop, outgoing query).

    ``record``/``key`` may be passed when the layer was already peeled.
    Raises LayerAuthFailure if the layer is not addressed to this sensor.
    """
    query.check(params)
    if record is None:
        record, key = peel_layer(sensor.keypair, query, params)
    t, sb = params.t, params.slot_bytes
    if record.slot > t:
        # Only a wrong key gets past the magic byte with a bad slot.
        raise LayerAuthFailure(f"slot {record.slot} out of range 0..{t}")
    header = query.header[:params.eph_len] + record.inner + rng.randbytes(RECORD_LEN)
    body = bytearray(query.body)
    if record.slot:
        off = (record.slot - 1) * sb
        body[off:off + sb] = sample_reading(sensor, tick, params.reading_bits).value.to_bytes(sb, "big")
    body_key = key if record.slot else ZERO_KEY
    if body_key != ZERO_KEY:
        for s in range(1, t + 1):
            off = (s - 1) * sb
            body[off:off + sb] = keystream_xform(body_key, body_nonce(s), body[off:off + sb])
    return record.next_hop, Query(header, bytes(body))
