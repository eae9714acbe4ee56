"""Scalar arithmetic over the two supported local fields.

The archimedean field is the reals with the usual absolute value,
represented by Python floats.  The nonarchimedean field is the rationals
carrying a p-adic absolute value |x| = p**(-v_p(x)), represented exactly
by :class:`fractions.Fraction`.  Keeping nonarchimedean scalars exact
turns every ultrametric identity into an equality that tests can assert
without tolerances.

A small outward-rounded interval type (:class:`Interval`) provides the
certified archimedean mode used by the ping-pong certifier: every
arithmetic result is an interval guaranteed to contain the exact value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .errors import DomainError, UsageError

ARCHIMEDEAN = "archimedean"
NONARCHIMEDEAN = "nonarchimedean"

#: Marker returned by :func:`valuation` at zero.
INFINITE_VALUATION = math.inf

Scalar = Union[float, Fraction, int]


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class FieldSpec:
    """The working local field: the reals, or Q with a p-adic absolute value."""

    kind: str
    prime: int | None = None

    def __post_init__(self):
        if self.kind not in (ARCHIMEDEAN, NONARCHIMEDEAN):
            raise DomainError(f"unknown field kind {self.kind!r}")
        if self.kind == NONARCHIMEDEAN:
            if self.prime is None or not _is_prime(self.prime):
                raise DomainError(f"nonarchimedean field needs a prime >= 2, got {self.prime!r}")
        elif self.prime is not None:
            raise DomainError("archimedean field takes no prime")

    @property
    def is_archimedean(self) -> bool:
        return self.kind == ARCHIMEDEAN

    @classmethod
    def real(cls) -> "FieldSpec":
        return cls(ARCHIMEDEAN)

    @classmethod
    def padic(cls, prime: int) -> "FieldSpec":
        return cls(NONARCHIMEDEAN, prime)

    def to_dict(self) -> dict:
        if self.is_archimedean:
            return {"kind": ARCHIMEDEAN}
        return {"kind": NONARCHIMEDEAN, "prime": self.prime}

    @classmethod
    def from_dict(cls, doc: dict) -> "FieldSpec":
        return cls(doc["kind"], doc.get("prime"))

    def __str__(self) -> str:
        return "R" if self.is_archimedean else f"Q_{self.prime}"


def valuation(x: Scalar, prime: int) -> int | float:
    """p-adic valuation of an exact rational.

    Returns v_p(numerator) - v_p(denominator), or :data:`INFINITE_VALUATION`
    for x = 0.  Floats are rejected: the valuation is only meaningful for
    exact scalars.
    """
    if isinstance(x, float):
        raise UsageError("valuation is defined for exact rationals, not floats")
    x = Fraction(x)
    if x == 0:
        return INFINITE_VALUATION
    num, den = x.numerator, x.denominator
    v = 0
    while num % prime == 0:
        num //= prime
        v += 1
    while den % prime == 0:
        den //= prime
        v -= 1
    return v


def abs_value(x: Scalar, field: FieldSpec):
    """Absolute value of a scalar in the given field.

    Archimedean: the usual absolute value as a float.  Nonarchimedean:
    p**(-v_p(x)) returned as an exact Fraction, with |0| = 0.
    """
    if field.is_archimedean:
        return abs(float(x))
    if x == 0:
        return Fraction(0)
    v = valuation(x, field.prime)
    if v >= 0:
        return Fraction(1, field.prime**v)
    return Fraction(field.prime ** (-v))


def parse_scalar(text, field: FieldSpec) -> Scalar:
    """Parse a serialized scalar ("num/den", integer or decimal literal)."""
    if field.is_archimedean:
        if isinstance(text, str) and "/" in text:
            return float(Fraction(text))
        return float(text)
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"cannot parse nonarchimedean scalar {text!r}") from exc


def format_scalar(x: Scalar, field: FieldSpec) -> str:
    """Serialize a scalar: round-trippable decimal for reals, num/den otherwise."""
    if field.is_archimedean:
        return repr(float(x))
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def exact_scalar(x: Scalar) -> Fraction:
    """Exact rational value of a scalar (floats convert exactly)."""
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(x)


# ---------------------------------------------------------------------------
# Certified interval arithmetic (archimedean only)
# ---------------------------------------------------------------------------

_INF = math.inf


def _down(x: float) -> float:
    return math.nextafter(x, -_INF)


def _up(x: float) -> float:
    return math.nextafter(x, _INF)


@dataclass(frozen=True)
class Interval:
    """Closed float interval with outward rounding.

    Each operation widens its endpoints by one ulp, so the result is
    guaranteed to contain the exact real value whenever the inputs do.
    """

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise DomainError(f"bad interval [{self.lo}, {self.hi}]")

    @classmethod
    def exact(cls, x) -> "Interval":
        """Interval containing an int, float or Fraction exactly."""
        if isinstance(x, Interval):
            return x
        if isinstance(x, float):
            return cls(x, x)
        q = Fraction(x)
        f = float(q)
        if not math.isinf(f) and Fraction(f) == q:
            return cls(f, f)
        return cls(_down(f), _up(f))

    def __add__(self, other) -> "Interval":
        o = Interval.exact(other)
        return Interval(_down(self.lo + o.lo), _up(self.hi + o.hi))

    __radd__ = __add__

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other) -> "Interval":
        return self + (-Interval.exact(other))

    def __rsub__(self, other) -> "Interval":
        return Interval.exact(other) + (-self)

    def __mul__(self, other) -> "Interval":
        o = Interval.exact(other)
        c = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Interval(_down(min(c)), _up(max(c)))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Interval":
        o = Interval.exact(other)
        if o.lo <= 0.0 <= o.hi:
            raise DomainError("interval division by an interval containing zero")
        c = (self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi)
        return Interval(_down(min(c)), _up(max(c)))

    def __rtruediv__(self, other) -> "Interval":
        return Interval.exact(other) / self

    def __abs__(self) -> "Interval":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval(0.0, max(-self.lo, self.hi))

    def sqrt(self) -> "Interval":
        if self.lo < 0:
            raise DomainError("interval sqrt of a possibly negative interval")
        lo = math.sqrt(self.lo)
        hi = math.sqrt(self.hi)
        return Interval(max(0.0, _down(lo)), _up(hi))

    # Certified comparisons: true only when every pair of contained values
    # satisfies the relation.
    def certainly_le(self, other) -> bool:
        return self.hi <= Interval.exact(other).lo

    def certainly_lt(self, other) -> bool:
        return self.hi < Interval.exact(other).lo

    def certainly_ge(self, other) -> bool:
        return self.lo >= Interval.exact(other).hi

    def certainly_gt(self, other) -> bool:
        return self.lo > Interval.exact(other).hi

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)
