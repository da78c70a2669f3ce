"""Linear recurrences ``u_n = sum a_i(n) * alpha_i**n`` over Q and the count of n with H(u_n) <= X."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import HeightOne, InputError, TailUnstable
from .heights import as_tuple, format_rational, height_scalar, height_vector, parse_rational

DEFAULT_SLACK = 0.5
DEFAULT_TAIL = 64
MAX_DOUBLINGS = 4


@dataclass(frozen=True)
class RecurrenceSpec:
    """Coefficient polynomials (constant term first) and characteristic roots."""

    polys: tuple[tuple[Fraction, ...], ...]
    roots: tuple[Fraction, ...]

    @classmethod
    def from_strings(cls, polys: Sequence[Sequence], roots: Sequence) -> "RecurrenceSpec":
        spec = cls(tuple(as_tuple(p) for p in polys), as_tuple(roots))
        if len(spec.polys) != len(spec.roots):
            raise InputError(f"{len(spec.polys)} polynomials but {len(spec.roots)} roots")
        if any(all(c == 0 for c in p) for p in spec.polys):
            raise InputError("coefficient polynomials must be non-zero")
        if any(r == 0 for r in spec.roots):
            raise InputError("characteristic roots must be non-zero")
        return spec

    @property
    def k(self) -> int:
        return len(self.roots)

    @property
    def H(self) -> int:
        return height_vector(self.roots)


@dataclass
class Validation:
    valid: bool
    violations: list[tuple[int, int, Fraction]]
    H: int
    H_exceeds_one: bool


@dataclass
class BoundedTermsReport:
    count: int
    scan_bound: int
    log_ratio: float
    doublings: int
    members: list[int] = field(default_factory=list)


def validate_recurrence(spec: RecurrenceSpec) -> Validation:
    """Every ratio ``alpha_i / alpha_j`` must avoid the rational roots of unity ``±1``."""
    bad = []
    for i, j in itertools.combinations(range(spec.k), 2):
        q = spec.roots[i] / spec.roots[j]
        if q in (1, -1):
            bad.append((i + 1, j + 1, q))
    H = spec.H
    return Validation(valid=not bad, violations=bad, H=H, H_exceeds_one=H > 1)


def _poly_at(coeffs: Sequence[Fraction], n: int) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * n + c
    return acc


def term_value(spec: RecurrenceSpec, n: int) -> Fraction:
    if n < 0:
        raise InputError("n must be non-negative")
    return sum((_poly_at(p, n) * r**n for p, r in zip(spec.polys, spec.roots)), Fraction(0))


def zeros_up_to(spec: RecurrenceSpec, N: int) -> list[int]:
    return [n for n in range(N + 1) if term_value(spec, n) == 0]


def count_bounded_terms(
    spec: RecurrenceSpec, X, slack: float = DEFAULT_SLACK, tail: int = DEFAULT_TAIL
) -> BoundedTermsReport:
    """Exact ``|{n >= 0 : H(u_n) <= X}|`` by scanning ``0..N_max``.

    ``N_max = ceil((1 + slack) log X / log H) + tail``; the last ``tail`` terms
    must all have height above X, otherwise ``N_max`` is doubled (at most
    four times) before giving up with :class:`TailUnstable`.
    """
    X = parse_rational(X)
    if X < 1:
        raise InputError("X must be at least 1")
    H = spec.H
    if H == 1:
        raise HeightOne("H(alpha_1, ..., alpha_k) = 1; the count is not governed by log X / log H")
    log_h = math.log(H)
    n_max = math.ceil((1 + slack) * math.log(X) / log_h) + tail
    for doubling in range(MAX_DOUBLINGS + 1):
        members = [n for n in range(n_max + 1) if height_scalar(term_value(spec, n)) <= X]
        if all(height_scalar(term_value(spec, n)) > X for n in range(n_max - tail + 1, n_max + 1)):
            lx = math.log(X)
            return BoundedTermsReport(
                count=len(members),
                scan_bound=n_max,
                log_ratio=len(members) * log_h / lx if lx > 0 else math.inf,
                doublings=doubling,
                members=members,
            )
        n_max *= 2
    raise TailUnstable(f"terms of height <= {format_rational(X)} persist past n = {n_max // 2}")
