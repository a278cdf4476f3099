"""Independent reference implementations used only by the tests.

None of this imports the package's crypto: affine double-and-add on the curve,
HKDF written against ``hmac``, and counter mode assembled from raw AES block
encryptions. Running the module regenerates ``data/kdf_vectors.json``.
"""
import hashlib
import hmac
import json
import random
from pathlib import Path

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

P = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF7FFFFFFF
A = P - 3
B = 0x1C97BEFC54BD7A8B65ACF89F81D4D4ADC565FA45
G = (0x4A96B5688EF573284664698968C38BB913CBFC82, 0x23A628553168947D59DCC912042351377AC5FB32)
N = 0x0100000000000000000001F4C8F927AED3CA752257

SCHNORR_P = 0xC897A89CD1566B6DC61B8156993B62255B61449B
TAG = b"onionwsn-kdf-v1"
VECTORS = Path(__file__).parent / "data" / "kdf_vectors.json"


def ec_add(p1, p2):
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    (x1, y1), (x2, y2) = p1, p2
    if x1 == x2 and (y1 + y2) % P == 0:
        return None
    if p1 == p2:
        lam = (3 * x1 * x1 + A) * pow(2 * y1, P - 2, P) % P
    else:
        lam = (y2 - y1) * pow(x2 - x1, P - 2, P) % P
    x3 = (lam * lam - x1 - x2) % P
    return x3, (lam * (x1 - x3) - y1) % P


def ec_mul(k, pt):
    acc = None
    for bit in bin(k)[2:]:
        acc = ec_add(acc, acc)
        if bit == "1":
            acc = ec_add(acc, pt)
    return acc


def ec_encode(pt):
    x, y = pt
    return bytes([2 + (y % 2)]) + x.to_bytes(20, "big")


def ec_decode(data):
    x = int.from_bytes(data[1:], "big")
    y2 = (x ** 3 + A * x + B) % P
    y = pow(y2, (P + 1) // 4, P)
    if y % 2 != data[0] - 2:
        y = P - y
    return x, y


def schnorr_mul(k, elem):
    acc = 1
    for bit in bin(k % ((SCHNORR_P - 1) // 2))[2:]:
        acc = acc * acc % SCHNORR_P
        if bit == "1":
            acc = acc * elem % SCHNORR_P
    return acc


def hkdf16(ikm, counter=0):
    prk = hmac.new(TAG, ikm, hashlib.sha256).digest()
    return hmac.new(prk, TAG + bytes([counter]) + b"\x01", hashlib.sha256).digest()[:16]


def kdf(ikm):
    counter = 0
    while True:
        k = hkdf16(ikm, counter)
        if k != bytes(16):
            return k
        counter += 1


def ec_shared_key(x, R_encoded):
    return kdf(ec_encode(ec_mul(x, ec_decode(R_encoded))))


def ctr_xor(key, nonce, data):
    if key == bytes(16):
        return bytes(data)
    ecb = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    ctr = int.from_bytes(nonce, "big")
    stream = b""
    while len(stream) < len(data):
        stream += ecb.update(ctr.to_bytes(16, "big"))
        ctr = (ctr + 1) % (1 << 128)
    return bytes(a ^ b for a, b in zip(data, stream))


def unwrap_header(header, path_private_keys, eph_len=21):
    """Peel every layer with the route's private keys, without re-padding.

    Returns the parsed (magic, next_hop, slot) triples and the decrypted
    nested region at each position.
    """
    R = header[:eph_len]
    nested = header[eph_len:]
    fields, plains = [], []
    for x in path_private_keys:
        plain = ctr_xor(ec_shared_key(x, R), b"head" + bytes(12), nested)
        fields.append((plain[0], int.from_bytes(plain[1:3], "big"), plain[3]))
        plains.append(plain)
        nested = plain[4:]
    return fields, plains


def make_vectors(count=8, seed=2024):
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        x = rng.randrange(1, N)
        r = rng.randrange(1, N)
        R = ec_encode(ec_mul(r, G))
        out.append({"x": f"{x:x}", "R": R.hex(), "key": ec_shared_key(x, R).hex()})
    return out


if __name__ == "__main__":
    VECTORS.write_text(json.dumps({"group": "secp160r1", "vectors": make_vectors()}, indent=1) + "\n")
