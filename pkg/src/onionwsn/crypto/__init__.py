from .envelope import (HEADER_NONCE, KDF_TAG, KEY_LEN, ZERO_KEY, EphemeralPair, KeyPair,
                       body_nonce, envelope_decrypt, envelope_encrypt, ephemeral, kdf, keygen,
                       keystream_xform, shared_key)
from .group import SchnorrGroup, Secp160r1, get_group

__all__ = [
    "HEADER_NONCE", "KDF_TAG", "KEY_LEN", "ZERO_KEY", "EphemeralPair", "KeyPair", "body_nonce",
    "envelope_decrypt", "envelope_encrypt", "ephemeral", "kdf", "keygen", "keystream_xform",
    "shared_key", "SchnorrGroup", "Secp160r1", "get_group",
]
