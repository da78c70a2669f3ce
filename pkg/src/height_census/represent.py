"""Values ``a_1 x_1 + ... + a_k x_k`` with ``a`` in a coefficient family and ``x_i`` in Gamma_1.

Vanishing subsums are allowed here; only ``alpha = 0`` itself is left out.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .census import CensusConfig, exponent_box
from .errors import InputError, RankZero, UnvalidatedFamily
from .heights import TupleK, as_tuple, height_scalar, parse_rational, require_nonzero_tuple
from .logspace import VolumeResult, _group_forms, eval_log_height_float, volume_c_gamma
from .multgroup import GroupDescriptor, compose_element, in_group, product_group


@dataclass(frozen=True)
class CoefficientFamily:
    k: int
    tuples: tuple[TupleK, ...]

    @classmethod
    def of(cls, tuples: Iterable[Sequence], auto_close_permutations: bool = False) -> "CoefficientFamily":
        ts: list[TupleK] = []
        for t in tuples:
            t = as_tuple(t)
            require_nonzero_tuple(t)
            if t not in ts:
                ts.append(t)
        if not ts:
            raise InputError("coefficient family is empty")
        k = len(ts[0])
        if any(len(t) != k for t in ts):
            raise InputError("all tuples in a family need the same length")
        if auto_close_permutations:
            for t in list(ts):
                for p in permutation_orbit(t)[0]:
                    if p not in ts:
                        ts.append(p)
        return cls(k=k, tuples=tuple(sorted(ts)))

    def __len__(self) -> int:
        return len(self.tuples)


@dataclass(frozen=True)
class Violation:
    condition: str  # "1.a", "1.c" or "1.b"
    witness: tuple

    def describe(self) -> str:
        return f"condition ({self.condition}) fails for {self.witness}"


def permutation_orbit(a: Sequence) -> tuple[set[TupleK], int]:
    a = tuple(parse_rational(x) for x in a)
    orbit = set()
    stab = 0
    for perm in itertools.permutations(range(len(a))):
        image = tuple(a[i] for i in perm)
        orbit.add(image)
        stab += image == a
    return orbit, stab


def validate_family(family: CoefficientFamily, gamma1: GroupDescriptor) -> list[Violation]:
    """Violations of the three family conditions; empty means valid."""
    if gamma1.k != 1:
        raise InputError("gamma1 must be a subgroup of Q*")
    out = []
    for a in family.tuples:
        for i, j in itertools.combinations(range(family.k), 2):
            if a[i] != a[j] and in_group(gamma1, (a[i] / a[j],)):
                out.append(Violation("1.a", (a, (i + 1, j + 1))))
    for a, b in itertools.combinations(family.tuples, 2):
        if all(in_group(gamma1, (x / y,)) for x, y in zip(a, b)):
            out.append(Violation("1.c", (a, b)))
    members = set(family.tuples)
    for a in family.tuples:
        for p in sorted(permutation_orbit(a)[0]):
            if p not in members:
                out.append(Violation("1.b", (a, p)))
    return out


def _value_rounds(gamma_k: GroupDescriptor, family: CoefficientFamily, X: Fraction, cfg: CensusConfig):
    """Map each representable value in the scanned domain to the first domain round containing it."""
    bounds = cfg.domain_bounds(math.log(X))
    forms = _group_forms(gamma_k)
    ranges = exponent_box(gamma_k, bounds[-1], cfg.box_margin)
    first: dict[Fraction, int] = {}
    zs = list(itertools.product(*ranges))
    hs = eval_log_height_float(forms, np.array(zs, dtype=float))
    for z, h in zip(zs, hs):
        if h > bounds[-1] * (1 + 1e-12) + 1e-9:
            continue
        rnd = next(t for t, bnd in enumerate(bounds) if h <= bnd * (1 + 1e-12) + 1e-9 or t == len(bounds) - 1)
        base = compose_element(gamma_k, 0, z)
        for tors in gamma_k.torsion:
            x = [t * b for t, b in zip(tors, base)]
            for a in family.tuples:
                alpha = sum(ai * xi for ai, xi in zip(a, x))
                if alpha != 0 and height_scalar(alpha) <= X:
                    if rnd < first.get(alpha, len(bounds)):
                        first[alpha] = rnd
    return first, len(bounds)


def representable_values(gamma1: GroupDescriptor, family: CoefficientFamily, X, cfg: CensusConfig = CensusConfig()) -> set[Fraction]:
    X = parse_rational(X)
    first, _ = _value_rounds(product_group(gamma1, family.k), family, X, cfg)
    return set(first)


def count_representable(
    gamma1: GroupDescriptor, family: CoefficientFamily, X, cfg: CensusConfig = CensusConfig()
) -> tuple[int, bool]:
    """``(|T_A(X)|, complete)``; the count is taken over the largest scanned domain."""
    if gamma1.rank < 1:
        raise RankZero("Gamma_1 must have positive rank")
    X = parse_rational(X)
    if X < 1:
        raise InputError("X must be at least 1")
    bad = validate_family(family, gamma1)
    if bad:
        raise UnvalidatedFamily("; ".join(v.describe() for v in bad))
    first, rounds = _value_rounds(product_group(gamma1, family.k), family, X, cfg)
    per_round = [sum(1 for r in first.values() if r <= t) for t in range(rounds)]
    return per_round[-1], len(set(per_round)) == 1


@dataclass
class PredictedConstant:
    constant: VolumeResult
    c_gamma_k: VolumeResult
    orbit_constants: dict[TupleK, float] = field(default_factory=dict)
    power_family_constant: float | None = None


def predicted_constant(gamma1: GroupDescriptor, family: CoefficientFamily) -> PredictedConstant:
    """``|A| * c(Gamma_1^k) / k!`` together with the per-orbit and ``B^k`` special cases."""
    k = family.k
    _, c = volume_c_gamma(product_group(gamma1, k))
    main = c.scaled(Fraction(len(family), math.factorial(k)))
    orbits: dict[TupleK, float] = {}
    seen: set[TupleK] = set()
    for a in family.tuples:
        if a in seen:
            continue
        orbit, stab = permutation_orbit(a)
        seen |= orbit
        orbits[min(orbit)] = c.value / stab
    values = sorted({x for a in family.tuples for x in a})
    power = None
    if set(family.tuples) == set(itertools.product(values, repeat=k)):
        power = len(values) ** k * c.value / math.factorial(k)
    return PredictedConstant(constant=main, c_gamma_k=c, orbit_constants=orbits, power_family_constant=power)
