"""Exact integer combinations of prime logarithms.

A :class:`LogNumber` stands for ``sum(c_p * log p)`` with integer ``c_p``.
Because the logarithms of distinct primes are linearly independent over Q,
such a value is zero exactly when every coefficient is zero; this is what
makes all the sign decisions in this package exact.  Nonzero values get their
sign from interval evaluation at increasing precision.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from mpmath import iv

from .errors import PrecisionExhausted
from .heights import factor_rational, prime_factors

START_PREC = 128
MAX_PREC = 4096

# mpmath's interval context keeps its precision globally
_IV_LOCK = threading.Lock()


@dataclass(frozen=True)
class LogNumber:
    coeffs: tuple[tuple[int, int], ...] = field(default=())

    @classmethod
    def from_map(cls, coeffs: Mapping[int, int]) -> "LogNumber":
        """Build from a ``{prime: coefficient}`` map, dropping zero coefficients."""
        return cls(tuple(sorted((int(p), int(c)) for p, c in coeffs.items() if c != 0)))

    @classmethod
    def from_terms(cls, terms: Mapping[int, int]) -> "LogNumber":
        """Build ``sum(c * log b)`` for arbitrary integer bases ``b >= 1``."""
        out: dict[int, int] = {}
        for base, c in terms.items():
            for p, e in prime_factors(base).items():
                out[p] = out.get(p, 0) + c * e
        return cls.from_map(out)

    @classmethod
    def log_of(cls, x: Fraction | int) -> "LogNumber":
        """``log |x|`` for a nonzero rational."""
        return cls.from_map(factor_rational(Fraction(x)))

    def as_dict(self) -> dict[int, int]:
        return dict(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "LogNumber") -> "LogNumber":
        d = self.as_dict()
        for p, c in other.coeffs:
            d[p] = d.get(p, 0) + c
        return LogNumber.from_map(d)

    def __neg__(self) -> "LogNumber":
        return LogNumber(tuple((p, -c) for p, c in self.coeffs))

    def __sub__(self, other: "LogNumber") -> "LogNumber":
        return self + (-other)

    def scale(self, m: int) -> "LogNumber":
        return LogNumber.from_map({p: m * c for p, c in self.coeffs})

    def __float__(self) -> float:
        return math.fsum(c * math.log(p) for p, c in self.coeffs)

    def exp_rational(self) -> Fraction:
        """``exp`` of the value, which is the rational ``prod p**c``."""
        out = Fraction(1)
        for p, c in self.coeffs:
            out *= Fraction(p) ** c
        return out

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        return " + ".join(f"{c}*log({p})" for p, c in self.coeffs).replace("+ -", "- ")


ZERO = LogNumber()


def sign_of(x: LogNumber, max_prec: int = MAX_PREC) -> int:
    """Sign of ``x``: exact zero test, then interval evaluation with doubling precision."""
    if x.is_zero():
        return 0
    prec = START_PREC
    with _IV_LOCK:
        saved = iv.prec
        try:
            while prec <= max_prec:
                iv.prec = prec
                total = iv.mpf(0)
                for p, c in x.coeffs:
                    total += c * iv.log(p)
                if total.a > 0:
                    return 1
                if total.b < 0:
                    return -1
                prec *= 2
        finally:
            iv.prec = saved
    raise PrecisionExhausted(f"could not separate {x} from 0 at {max_prec} bits")


def compare(x: LogNumber, y: LogNumber) -> int:
    return sign_of(x - y)


def log_max(values: list[LogNumber]) -> LogNumber:
    best = values[0]
    for v in values[1:]:
        if sign_of(v - best) > 0:
            best = v
    return best
