"""ECIES-style envelope encryption with a shared ephemeral point.

A query carries one ephemeral element R; every layer key is derived from the
Diffie-Hellman value r*Y_i (sender) or x_i*R (recipient). The symmetric part
is AES-128 in counter mode, which is length preserving and decrypts prefixes,
as the constant-size header trimming requires.
"""
from __future__ import annotations

import secrets
from dataclasses import dataclass
from typing import Any, Optional

from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .._rng import SeedLike, as_rng
from ..errors import InvalidPoint
from .group import get_group

KEY_LEN = 16
ZERO_KEY = bytes(KEY_LEN)  # identity transform sentinel
KDF_TAG = b"onionwsn-kdf-v1"
HEADER_NONCE = b"head" + bytes(12)


def body_nonce(slot: int) -> bytes:
    return b"body" + slot.to_bytes(12, "big")


@dataclass(frozen=True)
class KeyPair:
    private: int
    public: Any
    group: str = "secp160r1"


@dataclass(frozen=True)
class EphemeralPair:
    r: int
    R: Any
    encoded: bytes


def _scalar(group, seed: SeedLike) -> int:
    if seed is None:
        return 1 + secrets.randbelow(group.order - 1)
    return as_rng(seed).randrange(1, group.order)


def keygen(seed: SeedLike = None, group: str = "secp160r1") -> KeyPair:
    """Fresh key pair; deterministic when ``seed`` is given (test mode)."""
    g = get_group(group)
    x = _scalar(g, seed)
    return KeyPair(x, g.mul_base(x), group)


def ephemeral(seed: SeedLike = None, group: str = "secp160r1") -> EphemeralPair:
    g = get_group(group)
    r = _scalar(g, seed)
    R = g.mul_base(r)
    return EphemeralPair(r, R, g.encode(R))


def kdf(shared_encoding: bytes) -> bytes:
    """HKDF-SHA256 extract-then-expand; a retry counter skips the zero key."""
    for counter in range(256):
        key = HKDF(algorithm=hashes.SHA256(), length=KEY_LEN, salt=KDF_TAG,
                   info=KDF_TAG + bytes([counter])).derive(shared_encoding)
        if key != ZERO_KEY:
            return key
    raise RuntimeError("KDF produced the zero key 256 times")  # pragma: no cover


def shared_key(a: int, B: Any, group: str = "secp160r1") -> bytes:
    g = get_group(group)
    if B is None or g.is_identity(B) or not g.is_valid(B):
        raise InvalidPoint("shared key input must be a non-identity group element")
    S = g.mul(a, B)
    if g.is_identity(S):
        raise InvalidPoint("degenerate shared point")
    return kdf(g.encode(S))


def keystream_xform(key: bytes, nonce: bytes, data: bytes) -> bytes:
    """XOR ``data`` with the AES-CTR keystream for (key, nonce); an involution."""
    if key == ZERO_KEY or not data:
        return bytes(data)
    enc = Cipher(algorithms.AES(key), modes.CTR(nonce)).encryptor()
    return enc.update(bytes(data)) + enc.finalize()


def envelope_encrypt(Y: Any, r: int, m: bytes, nonce: bytes = HEADER_NONCE,
                     group: str = "secp160r1", key: Optional[bytes] = None) -> bytes:
    """Encrypt to public ``Y`` under the shared ephemeral scalar ``r``.

    R itself is not part of the output: one R travels per query.
    """
    return keystream_xform(key or shared_key(r, Y, group), nonce, m)


def envelope_decrypt(x: int, R: Any, c: bytes, nonce: bytes = HEADER_NONCE,
                     group: str = "secp160r1") -> bytes:
    return keystream_xform(shared_key(x, R, group), nonce, c)
