"""Places, normalized absolute values and Weil heights over Q.

Everything here is exact: rationals are :class:`fractions.Fraction` and every
absolute value at a place of Q is again rational.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import lcm
from typing import Iterable, Sequence, Union

from sympy import factorint, isprime

from .errors import InputError, ZeroArgument

RationalLike = Union[Fraction, int, str]
TupleK = tuple  # tuple[Fraction, ...]

_RATIONAL_RE = re.compile(r"^\s*([-−+]?\d+)(?:\s*/\s*(\d+))?\s*$")


def parse_rational(text: RationalLike) -> Fraction:
    """Parse ``"a/b"`` or ``"a"`` (decimal digits, optional leading minus)."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int) and not isinstance(text, bool):
        return Fraction(text)
    if not isinstance(text, str):
        raise InputError(f"expected a rational string, got {text!r}")
    m = _RATIONAL_RE.match(text)
    if m is None:
        raise InputError(f"malformed rational {text!r}")
    num = int(m.group(1).replace("−", "-"))
    den = int(m.group(2)) if m.group(2) is not None else 1
    if den == 0:
        raise InputError(f"zero denominator in {text!r}")
    return Fraction(num, den)


def format_rational(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def as_tuple(entries: Iterable[RationalLike]) -> TupleK:
    t = tuple(parse_rational(e) for e in entries)
    if not t:
        raise InputError("tuples need at least one entry")
    return t


def require_nonzero_tuple(x: Sequence[Fraction], k: int | None = None) -> None:
    from .errors import InvalidTuple

    if k is not None and len(x) != k:
        raise InvalidTuple(f"expected {k} entries, got {len(x)}: {x!r}")
    if any(e == 0 for e in x):
        raise InvalidTuple(f"zero entry in {tuple(map(format_rational, x))}")


@dataclass(frozen=True, order=True)
class Place:
    """A place of Q: ``Place(None)`` is the archimedean place, ``Place(p)`` is p-adic."""

    p: int | None = None

    def __post_init__(self):
        if self.p is not None and not isprime(self.p):
            raise InputError(f"{self.p} is not prime")

    @property
    def is_archimedean(self) -> bool:
        return self.p is None

    def __str__(self) -> str:
        return "inf" if self.p is None else str(self.p)

    def sort_key(self) -> int:
        return 0 if self.p is None else self.p


INFINITY = Place(None)


@lru_cache(maxsize=4096)
def prime_factors(n: int) -> dict[int, int]:
    """Factorization of ``|n|`` as ``{p: e}``; empty for ``|n| <= 1``."""
    n = abs(n)
    if n <= 1:
        return {}
    return {int(p): int(e) for p, e in factorint(n).items()}


def factor_rational(x: Fraction) -> dict[int, int]:
    """Nonzero exponents ``ord_p(x)`` for all primes dividing ``x``."""
    x = Fraction(x)
    if x == 0:
        raise ZeroArgument("cannot factor 0")
    out = dict(prime_factors(x.numerator))
    for p, e in prime_factors(x.denominator).items():
        out[p] = -e
    return out


def ord_at(x: RationalLike, p: int) -> int:
    x = parse_rational(x)
    if x == 0:
        raise ZeroArgument("ord_p(0) is infinite")
    if not isprime(p):
        raise InputError(f"{p} is not prime")
    e = 0
    n, d = x.numerator, x.denominator
    while n % p == 0:
        n //= p
        e += 1
    while d % p == 0:
        d //= p
        e -= 1
    return e


def abs_value(x: RationalLike, v: Place) -> Fraction:
    x = parse_rational(x)
    if x == 0:
        return Fraction(0)
    if v.is_archimedean:
        return abs(x)
    return Fraction(v.p) ** (-ord_at(x, v.p))


def places_of(entries: Iterable[Fraction]) -> list[Place]:
    """Archimedean place plus every prime dividing a numerator or denominator."""
    primes: set[int] = set()
    for e in entries:
        if e != 0:
            primes.update(factor_rational(e))
    return [INFINITY] + [Place(p) for p in sorted(primes)]


def height_scalar(x: RationalLike) -> int:
    x = parse_rational(x)
    return max(abs(x.numerator), x.denominator)


def height_vector(x: Sequence[RationalLike]) -> int:
    """Height of the tuple; with ``D`` the lcm of denominators this is ``max(D, |D*x_i|)``."""
    xs = [parse_rational(e) for e in x]
    d = lcm(*(e.denominator for e in xs)) if xs else 1
    return max([d] + [abs(e.numerator) * (d // e.denominator) for e in xs])


def height_by_places(x: Sequence[RationalLike]) -> Fraction:
    """Height as the product over places of ``max(1, ||x||_v)`` (reference definition)."""
    xs = [parse_rational(e) for e in x]
    total = Fraction(1)
    for v in places_of(xs):
        total *= max([Fraction(1)] + [abs_value(e, v) for e in xs])
    return total


def tuple_mul(x: Sequence[Fraction], y: Sequence[Fraction]) -> TupleK:
    return tuple(a * b for a, b in zip(x, y))


def tuple_pow(x: Sequence[Fraction], m: int) -> TupleK:
    return tuple(Fraction(a) ** m for a in x)


def tuple_inv(x: Sequence[Fraction]) -> TupleK:
    return tuple(1 / Fraction(a) for a in x)
