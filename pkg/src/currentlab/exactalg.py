"""Exact arithmetic in the ring Q(t)[c] / (c^2 (1 - t^2) - 1).

Here t stands for the formal high-temperature variable tanh(beta) and c
for cosh(beta); the defining relation c^2 = 1/(1 - t^2) makes every
quantity appearing in parity-reduced current sums (t powers, the even
positivity rate q = 1 - 1/c, and products thereof) an element of this
ring.  A plain two-variable polynomial identity in independent (t, q)
would be false -- q is tied to t -- so the relation must be carried.

Elements are A(t) + B(t) c over a common denominator (1 - t^2)^d, with
Fraction coefficients.  Representation is unique up to common factors,
so equality is decided by cross-multiplied coefficient comparison; no
floating point is involved anywhere.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

Poly = dict  # degree -> Fraction, zero coefficients absent


def _padd(p: Poly, q: Poly) -> Poly:
    out = dict(p)
    for k, v in q.items():
        s = out.get(k, 0) + v
        if s:
            out[k] = s
        else:
            out.pop(k, None)
    return out


def _pmul(p: Poly, q: Poly) -> Poly:
    out: Poly = {}
    for i, a in p.items():
        for j, b in q.items():
            k = i + j
            s = out.get(k, 0) + a * b
            if s:
                out[k] = s
            else:
                out.pop(k, None)
    return out


def _pscale(p: Poly, s) -> Poly:
    if not s:
        return {}
    return {k: v * s for k, v in p.items()}


# (1 - t^2) and its power cache
_ONE_MINUS_T2: Poly = {0: Fraction(1), 2: Fraction(-1)}
_omt2_pows: list[Poly] = [{0: Fraction(1)}]


def _omt2(n: int) -> Poly:
    while len(_omt2_pows) <= n:
        _omt2_pows.append(_pmul(_omt2_pows[-1], _ONE_MINUS_T2))
    return _omt2_pows[n]


class AlgNum:
    """(A + B c) / (1 - t^2)^d with polynomial A, B over Fraction."""

    __slots__ = ("a", "b", "d")

    def __init__(self, a: Poly | None = None, b: Poly | None = None, d: int = 0):
        self.a = a or {}
        self.b = b or {}
        self.d = d

    # -- constructors --------------------------------------------------

    @staticmethod
    def const(v) -> "AlgNum":
        v = Fraction(v)
        return AlgNum({0: v} if v else {}, {}, 0)

    @staticmethod
    def t(power: int = 1) -> "AlgNum":
        return AlgNum({power: Fraction(1)}, {}, 0)

    @staticmethod
    def c() -> "AlgNum":
        return AlgNum({}, {0: Fraction(1)}, 0)

    @staticmethod
    def inv_c() -> "AlgNum":
        # 1/c = c (1 - t^2) by the defining relation
        return AlgNum({}, dict(_ONE_MINUS_T2), 0)

    @staticmethod
    def q_even() -> "AlgNum":
        # q = 1 - 1/c
        return AlgNum.const(1) - AlgNum.inv_c()

    # -- arithmetic ----------------------------------------------------

    def _lift(self, d: int) -> tuple[Poly, Poly]:
        f = _omt2(d - self.d)
        return _pmul(self.a, f), _pmul(self.b, f)

    def __add__(self, other: "AlgNum") -> "AlgNum":
        other = _coerce(other)
        d = max(self.d, other.d)
        a1, b1 = self._lift(d)
        a2, b2 = other._lift(d)
        return AlgNum(_padd(a1, a2), _padd(b1, b2), d)

    __radd__ = __add__

    def __neg__(self) -> "AlgNum":
        return AlgNum(_pscale(self.a, -1), _pscale(self.b, -1), self.d)

    def __sub__(self, other) -> "AlgNum":
        return self + (-_coerce(other))

    def __mul__(self, other) -> "AlgNum":
        other = _coerce(other)
        # (A1 + B1 c)(A2 + B2 c) = A1 A2 + B1 B2 c^2 + (A1 B2 + A2 B1) c
        # and c^2 = 1/(1 - t^2) raises the denominator exponent by one.
        aa = _pmul(self.a, other.a)
        bb = _pmul(self.b, other.b)
        ab = _padd(_pmul(self.a, other.b), _pmul(self.b, other.a))
        a = _padd(_pmul(aa, _ONE_MINUS_T2), bb)
        b = _pmul(ab, _ONE_MINUS_T2)
        return AlgNum(a, b, self.d + other.d + 1)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "AlgNum":
        if n < 0:
            raise ValueError("negative powers unsupported")
        out = AlgNum.const(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def is_zero(self) -> bool:
        return not self.a and not self.b

    def __eq__(self, other) -> bool:
        other = _coerce(other)
        d = max(self.d, other.d)
        a1, b1 = self._lift(d)
        a2, b2 = other._lift(d)
        return a1 == a2 and b1 == b2

    def __hash__(self):
        raise TypeError("AlgNum is mutable-ish; not hashable")

    # -- numeric evaluation (for sanity checks only) -------------------

    def evaluate(self, t: float) -> float:
        c = 1.0 / (1.0 - t * t) ** 0.5
        pa = sum(float(v) * t ** k for k, v in self.a.items())
        pb = sum(float(v) * t ** k for k, v in self.b.items())
        return (pa + pb * c) / (1.0 - t * t) ** self.d

    def __repr__(self):
        return f"AlgNum(a={self.a}, b={self.b}, d={self.d})"


def _coerce(v) -> AlgNum:
    if isinstance(v, AlgNum):
        return v
    return AlgNum.const(v)
