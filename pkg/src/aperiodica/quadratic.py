"""Exact arithmetic in real quadratic fields Q(sqrt(d)).

Elements are stored as three integers ``(a, b, c)`` with value
``(a + b*sqrt(d)) / c``, ``c > 0`` and ``gcd(a, b, c) == 1``.  The rational
coordinates ``p = a/c`` and ``q = b/c`` are exposed as :class:`Fraction`.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from functools import total_ordering
from numbers import Rational

__all__ = [
    "QuadElement",
    "DomainError",
    "quad",
    "parse_quad",
    "squarefree_part",
    "TAU",
    "SQRT5",
    "SQRT2",
    "SILVER",
]


class DomainError(ValueError):
    """Raised when elements of different quadratic fields are combined."""


def squarefree_part(n: int) -> tuple[int, int]:
    """Return ``(s, f)`` with ``n == s * f**2`` and ``s`` square-free."""
    if n <= 0:
        raise ValueError(f"expected a positive integer, got {n}")
    s, f = 1, 1
    p = 2
    while p * p <= n:
        while n % (p * p) == 0:
            n //= p * p
            f *= p
        if n % p == 0:
            n //= p
            s *= p
        p += 1
    return s * n, f


def _is_squarefree(d: int) -> bool:
    return d >= 2 and squarefree_part(d)[0] == d


@total_ordering
class QuadElement:
    """Immutable element ``p + q*sqrt(d)`` of a real quadratic field."""

    __slots__ = ("_a", "_b", "_c", "_d", "_hash")

    def __init__(self, p=0, q=0, d: int = 5):
        p = Fraction(p)
        q = Fraction(q)
        if not _is_squarefree(d):
            raise DomainError(f"d must be square-free and >= 2, got {d}")
        c = p.denominator * q.denominator // math.gcd(p.denominator, q.denominator)
        self._set(p.numerator * (c // p.denominator), q.numerator * (c // q.denominator), c, d)

    def _set(self, a: int, b: int, c: int, d: int) -> None:
        if c < 0:
            a, b, c = -a, -b, -c
        g = math.gcd(a, b, c)
        if g > 1:
            a, b, c = a // g, b // g, c // g
        self._a, self._b, self._c, self._d = a, b, c, d
        self._hash = None

    @classmethod
    def _raw(cls, a: int, b: int, c: int, d: int) -> QuadElement:
        obj = cls.__new__(cls)
        obj._set(a, b, c, d)
        return obj

    @classmethod
    def from_ints(cls, a: int, b: int, c: int, d: int) -> QuadElement:
        """Build ``(a + b*sqrt(d)) / c`` from integers."""
        if c == 0:
            raise ZeroDivisionError("zero denominator")
        if not _is_squarefree(d):
            raise DomainError(f"d must be square-free and >= 2, got {d}")
        return cls._raw(a, b, c, d)

    # -- coordinates -------------------------------------------------------

    @property
    def p(self) -> Fraction:
        return Fraction(self._a, self._c)

    @property
    def q(self) -> Fraction:
        return Fraction(self._b, self._c)

    @property
    def d(self) -> int:
        return self._d

    @property
    def ints(self) -> tuple[int, int, int]:
        """Canonical integer triple ``(a, b, c)``."""
        return self._a, self._b, self._c

    def is_rational(self) -> bool:
        return self._b == 0

    def is_integral(self) -> bool:
        """True if the element lies in the ring of integers of Q(sqrt(d))."""
        a, b, c = self._a, self._b, self._c
        if c == 1:
            return True
        if c == 2 and self._d % 4 == 1:
            return (a - b) % 2 == 0
        return False

    # -- coercion ----------------------------------------------------------

    def _coerce(self, other) -> QuadElement | None:
        if isinstance(other, QuadElement):
            if other._d != self._d and other._b != 0 and self._b != 0:
                raise DomainError(f"cannot combine Q(sqrt({self._d})) with Q(sqrt({other._d}))")
            return other
        if isinstance(other, (int, Rational)):
            f = Fraction(other)
            return QuadElement._raw(f.numerator, 0, f.denominator, self._d)
        return None

    def _field(self, other: QuadElement) -> int:
        return self._d if self._b != 0 or other._b == 0 else other._d

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        c1, c2 = self._c, o._c
        return QuadElement._raw(self._a * c2 + o._a * c1, self._b * c2 + o._b * c1, c1 * c2, self._field(o))

    __radd__ = __add__

    def __neg__(self) -> QuadElement:
        return QuadElement._raw(-self._a, -self._b, self._c, self._d)

    def __pos__(self) -> QuadElement:
        return self

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        d = self._field(o)
        a1, b1, a2, b2 = self._a, self._b, o._a, o._b
        return QuadElement._raw(a1 * a2 + d * b1 * b2, a1 * b2 + a2 * b1, self._c * o._c, d)

    __rmul__ = __mul__

    def inverse(self) -> QuadElement:
        a, b, c = self._a, self._b, self._c
        n = a * a - self._d * b * b
        if n == 0:
            raise ZeroDivisionError("division by zero in quadratic field")
        return QuadElement._raw(a * c, -b * c, n, self._d)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, n: int) -> QuadElement:
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        result = QuadElement._raw(1, 0, 1, self._d)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # -- conjugation, norm, embedding ------------------------------------

    def star(self) -> QuadElement:
        """Algebraic conjugate: sqrt(d) -> -sqrt(d)."""
        return QuadElement._raw(self._a, -self._b, self._c, self._d)

    def norm(self) -> Fraction:
        return Fraction(self._a * self._a - self._d * self._b * self._b, self._c * self._c)

    def trace(self) -> Fraction:
        return Fraction(2 * self._a, self._c)

    def sign(self) -> int:
        """Exact sign of the real embedding."""
        a, b = self._a, self._b
        if b == 0:
            return (a > 0) - (a < 0)
        sa = (a > 0) - (a < 0)
        sb = (b > 0) - (b < 0)
        if sa == 0 or sa == sb:
            return sb
        # opposite signs: compare a^2 with d*b^2
        diff = a * a - self._d * b * b
        return sa if diff > 0 else sb

    def __float__(self) -> float:
        a, b, c, d = self._a, self._b, self._c, self._d
        if b == 0:
            return a / c if abs(a) < 2**52 and c < 2**52 else float(Fraction(a, c))
        if (a > 0) == (b > 0) or a == 0:
            return float(Fraction(a, c)) + float(Fraction(b, c)) * math.sqrt(d)
        # cancellation: use (a + b r) = (a^2 - d b^2) / (a - b r)
        den = float(Fraction(a, c)) - float(Fraction(b, c)) * math.sqrt(d)
        return float(Fraction(a * a - d * b * b, c * c)) / den

    def embed(self) -> float:
        return float(self)

    def __abs__(self) -> QuadElement:
        return -self if self.sign() < 0 else self

    def __bool__(self) -> bool:
        return self._a != 0 or self._b != 0

    # -- comparison and hashing -------------------------------------------

    def __eq__(self, other) -> bool:
        if isinstance(other, QuadElement):
            if self._b == 0 and other._b == 0:
                return self._a == other._a and self._c == other._c
            return (self._a, self._b, self._c, self._d) == (other._a, other._b, other._c, other._d)
        if isinstance(other, (int, Rational)):
            f = Fraction(other)
            return self._b == 0 and self._a == f.numerator and self._c == f.denominator
        if isinstance(other, float):
            return self._b == 0 and self._a / self._c == other
        return NotImplemented

    def __lt__(self, other) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return (self - o).sign() < 0

    def __hash__(self) -> int:
        h = self._hash
        if h is None:
            if self._b == 0:
                h = hash(Fraction(self._a, self._c))
            else:
                h = hash((self._a, self._b, self._c, self._d))
            self._hash = h
        return h

    # -- text --------------------------------------------------------------

    def __repr__(self) -> str:
        return f"QuadElement({self.p!s}, {self.q!s}, d={self._d})"

    def __str__(self) -> str:
        p, q = self.p, self.q
        if q == 0:
            return str(p)
        qs = f"sqrt({self._d})" if abs(q) == 1 else f"{abs(q)}*sqrt({self._d})"
        if p == 0:
            return ("-" if q < 0 else "") + qs
        return f"{p} {'-' if q < 0 else '+'} {qs}"

    def __reduce__(self):
        return (QuadElement.from_ints, (self._a, self._b, self._c, self._d))


def quad(value, d: int = 5) -> QuadElement:
    """Coerce ints, Fractions, strings or QuadElements to a QuadElement."""
    if isinstance(value, QuadElement):
        return value
    if isinstance(value, str):
        return parse_quad(value, d)
    if isinstance(value, float):
        raise TypeError("floats cannot be converted exactly; pass a string or Fraction")
    return QuadElement(value, 0, d)


_TERM = re.compile(
    r"""\s*([+-])?\s*
        (?:(\d+(?:/\d+)?)\s*\*?\s*)?
        (sqrt\(\s*(\d+)\s*\))?\s*""",
    re.VERBOSE,
)


def parse_quad(text: str, d: int | None = None) -> QuadElement:
    """Parse strings such as ``"1/2 + 1/2*sqrt(5)"``, ``"-sqrt(2)"`` or ``"3"``.

    ``d`` is the field used for purely rational input; it must agree with any
    ``sqrt(...)`` present in the text.
    """
    s = text.strip()
    if not s:
        raise ValueError("empty quadratic number")
    p = Fraction(0)
    q = Fraction(0)
    field = None
    pos = 0
    first = True
    while pos < len(s):
        m = _TERM.match(s, pos)
        if m is None or m.end() == pos:
            raise ValueError(f"cannot parse quadratic number {text!r}")
        sgn, coef, root, rad = m.groups()
        if sgn is None and not first:
            raise ValueError(f"missing operator in {text!r}")
        if coef is None and root is None:
            raise ValueError(f"cannot parse quadratic number {text!r}")
        value = Fraction(coef) if coef is not None else Fraction(1)
        if sgn == "-":
            value = -value
        if root is not None:
            s_part, f = squarefree_part(int(rad))
            if s_part == 1:
                p += value * f
            else:
                if field is not None and field != s_part:
                    raise DomainError(f"mixed radicals in {text!r}")
                field = s_part
                q += value * f
        else:
            p += value
        pos = m.end()
        first = False
    if field is None:
        field = d if d is not None else 5
    elif d is not None and q != 0 and d != field:
        raise DomainError(f"{text!r} is not in Q(sqrt({d}))")
    return QuadElement(p, q, field)


TAU = QuadElement(Fraction(1, 2), Fraction(1, 2), 5)
SQRT5 = QuadElement(0, 1, 5)
SQRT2 = QuadElement(0, 1, 2)
SILVER = QuadElement(1, 1, 2)
