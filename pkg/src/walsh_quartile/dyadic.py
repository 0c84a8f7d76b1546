"""Exact dyadic rational scalars ``m * 2**e``.

Every scalar the library produces (coefficients, squared norms, sizes,
form values, maximal averages) lives in this type, so identity checks are
exact comparisons and never involve rounding.
"""
from __future__ import annotations

import enum
from fractions import Fraction
from numbers import Integral, Rational

#: Largest allowed |exponent| of a canonical value.
EXPONENT_LIMIT = 4096


class UniverseTooLargeError(OverflowError):
    """Raised when a value leaves the configured exponent range."""


class NotDyadicError(ValueError):
    """Raised when a result would need an odd denominator or an irrational."""


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def _trailing_zeros(m: int) -> int:
    return (m & -m).bit_length() - 1


class DyadicRational:
    """Immutable value ``mantissa * 2**exponent`` with odd (or zero) mantissa."""

    __slots__ = ("mantissa", "exponent")

    def __init__(self, mantissa: int = 0, exponent: int = 0):
        mantissa = int(mantissa)
        exponent = int(exponent)
        if mantissa == 0:
            exponent = 0
        else:
            tz = _trailing_zeros(mantissa)
            if tz:
                mantissa >>= tz
                exponent += tz
            if abs(exponent) > EXPONENT_LIMIT:
                raise UniverseTooLargeError(
                    f"exponent {exponent} outside +-{EXPONENT_LIMIT}")
        object.__setattr__(self, "mantissa", mantissa)
        object.__setattr__(self, "exponent", exponent)

    def __setattr__(self, name, value):
        raise AttributeError("DyadicRational is immutable")

    def __reduce__(self):
        return (DyadicRational, (self.mantissa, self.exponent))

    # -- construction -------------------------------------------------

    @classmethod
    def coerce(cls, value) -> "DyadicRational":
        """Convert an int, power-of-two-denominator Fraction or DyadicRational."""
        if isinstance(value, DyadicRational):
            return value
        if isinstance(value, Integral):
            return cls(int(value), 0)
        if isinstance(value, Rational):
            den = int(value.denominator)
            if den & (den - 1):
                raise NotDyadicError(f"{value} has a non power-of-two denominator")
            return cls(int(value.numerator), -(den.bit_length() - 1))
        if isinstance(value, str):
            return cls.coerce(Fraction(value))
        raise TypeError(f"cannot convert {type(value).__name__} to DyadicRational")

    @classmethod
    def pow2(cls, k: int) -> "DyadicRational":
        return cls(1, k)

    # -- conversions --------------------------------------------------

    def to_fraction(self) -> Fraction:
        if self.exponent >= 0:
            return Fraction(self.mantissa << self.exponent)
        return Fraction(self.mantissa, 1 << -self.exponent)

    def __float__(self) -> float:
        # int true division is correctly rounded
        if self.exponent >= 0:
            return float(self.mantissa << self.exponent)
        return self.mantissa / (1 << -self.exponent)

    def to_float(self) -> float:
        return float(self)

    def is_integer(self) -> bool:
        return self.exponent >= 0

    def __int__(self) -> int:
        if self.exponent >= 0:
            return self.mantissa << self.exponent
        raise NotDyadicError(f"{self} is not an integer")

    def to_json(self) -> list:
        return [str(self.mantissa), self.exponent]

    @classmethod
    def from_json(cls, obj) -> "DyadicRational":
        if isinstance(obj, (list, tuple)) and len(obj) == 2:
            return cls(int(obj[0]), int(obj[1]))
        if isinstance(obj, dict):
            return cls(int(obj["mantissa"]), int(obj["exponent"]))
        if isinstance(obj, (int, str)):
            return cls.coerce(obj)
        raise ValueError(f"bad DyadicRational encoding: {obj!r}")

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other):
        try:
            o = DyadicRational.coerce(other)
        except TypeError:
            return NotImplemented
        if self.mantissa == 0:
            return o
        if o.mantissa == 0:
            return self
        e = min(self.exponent, o.exponent)
        m = (self.mantissa << (self.exponent - e)) + (o.mantissa << (o.exponent - e))
        return DyadicRational(m, e)

    __radd__ = __add__

    def __neg__(self):
        return DyadicRational(-self.mantissa, self.exponent)

    def __pos__(self):
        return self

    def __abs__(self):
        return self if self.mantissa >= 0 else -self

    def __sub__(self, other):
        try:
            o = DyadicRational.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        try:
            o = DyadicRational.coerce(other)
        except TypeError:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        try:
            o = DyadicRational.coerce(other)
        except TypeError:
            return NotImplemented
        return DyadicRational(self.mantissa * o.mantissa, self.exponent + o.exponent)

    __rmul__ = __mul__

    def shift(self, k: int) -> "DyadicRational":
        """Multiply by ``2**k``."""
        return DyadicRational(self.mantissa, self.exponent + int(k))

    def __truediv__(self, other):
        try:
            o = DyadicRational.coerce(other)
        except TypeError:
            return NotImplemented
        if abs(o.mantissa) != 1:
            raise NotDyadicError(f"division by {o} is not a power of two")
        return DyadicRational(self.mantissa * o.mantissa, self.exponent - o.exponent)

    def __pow__(self, n: int):
        if not isinstance(n, Integral):
            return NotImplemented
        n = int(n)
        if n >= 0:
            return DyadicRational(self.mantissa ** n, self.exponent * n)
        return DyadicRational(1) / self ** (-n)

    # -- comparison ---------------------------------------------------

    def _cmp(self, other) -> int:
        o = DyadicRational.coerce(other)
        if self.mantissa == o.mantissa and self.exponent == o.exponent:
            return 0
        d = (self - o).mantissa
        return (d > 0) - (d < 0)

    def __eq__(self, other):
        try:
            return self._cmp(other) == 0
        except (TypeError, NotDyadicError):
            if isinstance(other, float):
                return float(self) == other
            return NotImplemented

    def __lt__(self, other):
        try:
            return self._cmp(other) < 0
        except TypeError:
            return NotImplemented

    def __le__(self, other):
        try:
            return self._cmp(other) <= 0
        except TypeError:
            return NotImplemented

    def __gt__(self, other):
        try:
            return self._cmp(other) > 0
        except TypeError:
            return NotImplemented

    def __ge__(self, other):
        try:
            return self._cmp(other) >= 0
        except TypeError:
            return NotImplemented

    def __hash__(self):
        if self.exponent >= 0:
            return hash(self.mantissa << self.exponent)
        return hash(self.to_fraction())

    def __bool__(self):
        return self.mantissa != 0

    def sign(self) -> int:
        return (self.mantissa > 0) - (self.mantissa < 0)

    def __repr__(self):
        return f"DyadicRational({self.mantissa}, {self.exponent})"

    def __str__(self):
        return str(self.to_fraction())


ZERO = DyadicRational(0)
ONE = DyadicRational(1)


def dyadic_arith(a, b, op: str) -> DyadicRational:
    """Apply ``op`` in {"add", "sub", "mul", "shift"}; for shift ``b`` is an integer exponent."""
    a = DyadicRational.coerce(a)
    if op == "shift":
        b = DyadicRational.coerce(b)
        if not b.is_integer():
            raise ValueError("shift amount must be an integer")
        return a.shift(int(b))
    b = DyadicRational.coerce(b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def compare(a, b) -> Ordering:
    return Ordering(DyadicRational.coerce(a)._cmp(b))


def iroot(n: int, k: int) -> int:
    """Floor of the k-th root of a non-negative integer."""
    if n < 0:
        raise ValueError("negative radicand")
    if n < 2 or k == 1:
        return n
    x = 1 << -(-n.bit_length() // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            return x
        x = y


def dyadic_pow(x, num: int, den: int = 1) -> DyadicRational:
    """Exact ``x ** (num/den)``; raises NotDyadicError when the result is not dyadic."""
    x = DyadicRational.coerce(x)
    q = Fraction(num, den)
    num, den = q.numerator, q.denominator
    if den != 1 and x.mantissa < 0:
        raise NotDyadicError("fractional power of a negative value")
    if x.mantissa == 0:
        if num <= 0:
            raise ZeroDivisionError("non-positive power of zero")
        return ZERO
    y = x ** num
    if den == 1:
        return y
    root = iroot(y.mantissa, den)
    if root ** den != y.mantissa or y.exponent % den:
        raise NotDyadicError(f"{x}**({q}) is not dyadic rational")
    return DyadicRational(root, y.exponent // den)


def exceeds_pow2(x, num: int, den: int = 1) -> bool:
    """Decide ``x > 2**(num/den)`` exactly (the right side may be irrational)."""
    x = DyadicRational.coerce(x)
    if x.mantissa <= 0:
        return False
    q = Fraction(num, den)
    a, b = q.numerator, q.denominator
    # m 2^e > 2^(a/b)  <=>  m^b > 2^(a - e b)
    t = a - x.exponent * b
    lhs = x.mantissa ** b
    if t < 0:
        return lhs << -t > 1
    return lhs > 1 << t
