"""Prime-order groups used for the envelope encryption.

Two backends share one small interface:

* ``Secp160r1`` -- the SEC 2 160-bit curve, compressed points (21 bytes).
* ``SchnorrGroup`` -- quadratic residues modulo a 160-bit safe prime
  (pure modular arithmetic, 20-byte elements).

Elements are opaque to callers: use ``mul``/``mul_base``/``encode``/``decode``.
"""
from __future__ import annotations

from typing import Dict, Optional, Tuple

from ..errors import InvalidPoint

try:
    from gmpy2 import mpz
except ImportError:  # pragma: no cover
    mpz = int

Point = Optional[Tuple[int, int]]  # affine; None is the point at infinity


class Secp160r1:
    name = "secp160r1"
    p = mpz(0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF7FFFFFFF)
    a = p - 3
    b = 0x1C97BEFC54BD7A8B65ACF89F81D4D4ADC565FA45
    gx = 0x4A96B5688EF573284664698968C38BB913CBFC82
    gy = 0x23A628553168947D59DCC912042351377AC5FB32
    order = 0x0100000000000000000001F4C8F927AED3CA752257
    element_len = 21
    identity: Point = None

    _WINDOW = 4

    def __init__(self):
        self.generator: Point = (mpz(self.gx), mpz(self.gy))
        self._base_table = self._odd_multiples(self.generator)

    # Jacobian arithmetic, a = -3.
    def _double(self, X, Y, Z):
        p = self.p
        if not Y:
            return 0, 1, 0
        delta = Z * Z % p
        gamma = Y * Y % p
        beta = X * gamma % p
        alpha = 3 * (X - delta) * (X + delta) % p
        X3 = (alpha * alpha - 8 * beta) % p
        Z3 = ((Y + Z) ** 2 - gamma - delta) % p
        Y3 = (alpha * (4 * beta - X3) - 8 * gamma * gamma) % p
        return X3, Y3, Z3

    def _add_affine(self, X1, Y1, Z1, x2, y2):
        p = self.p
        if not Z1:
            return x2, y2, 1
        z1z1 = Z1 * Z1 % p
        u2 = x2 * z1z1 % p
        s2 = y2 * Z1 * z1z1 % p
        h = (u2 - X1) % p
        r = 2 * (s2 - Y1) % p
        if not h:
            if not r:
                return self._double(X1, Y1, Z1)
            return 0, 1, 0
        hh = h * h % p
        i = 4 * hh % p
        j = h * i % p
        v = X1 * i % p
        X3 = (r * r - j - 2 * v) % p
        Y3 = (r * (v - X3) - 2 * Y1 * j) % p
        Z3 = ((Z1 + h) ** 2 - z1z1 - hh) % p
        return X3, Y3, Z3

    def _to_affine(self, X, Y, Z) -> Point:
        if not Z:
            return None
        p = self.p
        zi = pow(Z, -1, p)
        zi2 = zi * zi % p
        return X * zi2 % p, Y * zi2 * zi % p

    def _odd_multiples(self, P: Point):
        """Affine [P, 3P, 5P, ...] for the signed window recoding."""
        x, y = P
        twoP = self._to_affine(*self._double(x, y, 1))
        table = [P]
        for _ in range((1 << (self._WINDOW - 1)) - 1):
            prev = table[-1]
            table.append(self._to_affine(*self._add_affine(twoP[0], twoP[1], 1, prev[0], prev[1])))
        return table

    @staticmethod
    def _wnaf(k: int, w: int):
        digits = []
        half, full = 1 << (w - 1), 1 << w
        while k:
            if k & 1:
                d = k & (full - 1)
                if d >= half:
                    d -= full
                k -= d
            else:
                d = 0
            digits.append(d)
            k >>= 1
        return digits

    def _mul(self, k: int, table) -> Point:
        k %= self.order
        if not k or table is None:
            return None
        p = self.p
        X, Y, Z = 0, 1, 0
        for d in reversed(self._wnaf(k, self._WINDOW)):
            X, Y, Z = self._double(X, Y, Z)
            if d > 0:
                x2, y2 = table[d >> 1]
                X, Y, Z = self._add_affine(X, Y, Z, x2, y2)
            elif d < 0:
                x2, y2 = table[(-d) >> 1]
                X, Y, Z = self._add_affine(X, Y, Z, x2, p - y2)
        return self._to_affine(X, Y, Z)

    def mul_base(self, k: int) -> Point:
        return self._mul(k, self._base_table)

    def mul(self, k: int, P: Point) -> Point:
        if P is None:
            return None
        return self._mul(k, self._odd_multiples(P))

    def is_identity(self, P: Point) -> bool:
        return P is None

    def is_valid(self, P: Point) -> bool:
        if P is None:
            return False
        x, y = P
        p = self.p
        return 0 <= x < p and 0 <= y < p and (y * y - (x * x * x + self.a * x + self.b)) % p == 0

    def encode(self, P: Point) -> bytes:
        if P is None:
            raise InvalidPoint("cannot encode the point at infinity")
        x, y = P
        return bytes([2 | int(y & 1)]) + int(x).to_bytes(20, "big")

    def decode(self, data: bytes) -> Point:
        if len(data) != 21 or data[0] not in (2, 3):
            raise InvalidPoint("expected a 21-byte compressed point")
        p = self.p
        x = mpz(int.from_bytes(data[1:], "big"))
        if x >= p:
            raise InvalidPoint("x coordinate out of range")
        rhs = (x * x * x + self.a * x + self.b) % p
        y = pow(rhs, (p + 1) // 4, p)
        if y * y % p != rhs:
            raise InvalidPoint("x is not on the curve")
        if (y & 1) != (data[0] & 1):
            y = p - y
        return x, y


class SchnorrGroup:
    """Order-q subgroup of Z_p^* with p = 2q + 1 a 160-bit safe prime.

    p was found by scanning upward from SHA-256("onionwsn-schnorr-group").
    """

    name = "schnorr160"
    p = 0xC897A89CD1566B6DC61B8156993B62255B61449B
    order = (p - 1) // 2
    generator = 4
    element_len = 20
    identity = 1

    def mul_base(self, k: int) -> int:
        return pow(self.generator, k % self.order, self.p)

    def mul(self, k: int, P: int) -> int:
        return pow(P, k % self.order, self.p)

    def is_identity(self, P: int) -> bool:
        return P == 1

    def is_valid(self, P: int) -> bool:
        return 1 < P < self.p and pow(P, self.order, self.p) == 1

    def encode(self, P: int) -> bytes:
        if not 0 < P < self.p:
            raise InvalidPoint("element out of range")
        return P.to_bytes(20, "big")

    def decode(self, data: bytes) -> int:
        if len(data) != 20:
            raise InvalidPoint("expected a 20-byte element")
        P = int.from_bytes(data, "big")
        if not self.is_valid(P):
            raise InvalidPoint("not a subgroup element")
        return P


_GROUPS: Dict[str, object] = {}


def get_group(name: str = "secp160r1"):
    """Shared group instance by name (``secp160r1`` or ``schnorr160``)."""
    if name not in _GROUPS:
        if name == Secp160r1.name:
            _GROUPS[name] = Secp160r1()
        elif name in (SchnorrGroup.name, "schnorr", "abstract"):
            _GROUPS[name] = SchnorrGroup()
        else:
            raise ValueError(f"unknown group {name!r}")
    return _GROUPS[name]
