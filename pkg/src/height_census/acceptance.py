"""Acceptance checks, shared by ``height-census selftest`` and the pytest suite.

Each ``criterion_*`` function returns a :class:`CriterionResult`; the
tolerances are fixed here and are not configurable.
"""
from __future__ import annotations

import itertools
import json
import math
import random
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable

from .census import (
    CensusConfig,
    census_nondegenerate,
    count_height_ball,
    count_unfiltered,
)
from .errors import TailUnstable
from .heights import height_by_places, height_scalar, height_vector, places_of, abs_value
from .logspace import c_USk_closed, everest_polytope_volume, everest_volume, s_unit_group, volume_c_gamma
from .multgroup import GroupDescriptor, analyze_group, compose_element, decompose_element
from .recurrence import RecurrenceSpec, count_bounded_terms
from .represent import CoefficientFamily, count_representable, permutation_orbit, predicted_constant

FUZZ_CASES = 1000
FUZZ_SEED = 0xE5EED


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.number}. {self.name}: {self.detail} ({self.seconds:.2f}s)"


def shipped_groups() -> dict[str, GroupDescriptor]:
    return {
        "<(2,1/2)>": analyze_group(2, [("2", "1/2")]),
        "U_{inf,2}^2": s_unit_group([2], 2),
        "<(2,3)>": analyze_group(2, [("2", "3")]),
    }


# --------------------------------------------------------------------------- naive oracles


def naive_points(desc: GroupDescriptor, bound: int = 12):
    """Every element ``zeta * u^z`` with ``|z_i| <= bound``."""
    for z in itertools.product(range(-bound, bound + 1), repeat=desc.rank):
        for t in range(desc.torsion_order):
            yield z, compose_element(desc, t, z)


def naive_height_ball(desc: GroupDescriptor, X, bound: int = 12) -> int:
    return sum(1 for _, x in naive_points(desc, bound) if height_vector(x) <= X)


def naive_nondegenerate(desc: GroupDescriptor, a, X, bound: int = 12) -> tuple[int, int]:
    good = bad = 0
    for _, x in naive_points(desc, bound):
        terms = [ai * xi for ai, xi in zip(a, x)]
        if height_scalar(sum(terms)) > X:
            continue
        if any(
            sum(terms[i] for i in range(len(terms)) if mask >> i & 1) == 0 for mask in range(1, 1 << len(terms))
        ):
            bad += 1
        else:
            good += 1
    return good, bad


# --------------------------------------------------------------------------- criteria


EVEREST_EXPECTED = {(1, 1): Fraction(2), (1, 2): Fraction(3), (2, 1): Fraction(3), (1, 3): Fraction(4), (2, 2): Fraction(15, 4)}


def criterion_1() -> CriterionResult:
    t0 = time.perf_counter()
    worst = 0.0
    ok = True
    for (s, k), expected in EVEREST_EXPECTED.items():
        closed = everest_volume(s, k)
        tri = everest_polytope_volume(s, k).value
        rel = abs(tri - float(expected)) / float(expected)
        worst = max(worst, rel)
        ok &= closed == expected and rel <= 1e-6
    dt = time.perf_counter() - t0
    ok &= dt < 10
    return CriterionResult(1, "Everest volumes", ok, f"max rel err {worst:.2e}, formula matches frozen values: {ok}", dt)


def criterion_2() -> CriterionResult:
    t0 = time.perf_counter()
    _, c = volume_c_gamma(s_unit_group([2], 2))
    closed = c_USk_closed([2], 2)
    rel = abs(c.value - closed.value) / closed.value
    ok = rel <= 1e-6 and abs(closed.value - 12 / math.log(2) ** 2) <= 1e-9
    return CriterionResult(2, "c(U_S^k) consistency", ok, f"c={c.value:.6f} closed={closed.value:.6f} rel {rel:.2e}", time.perf_counter() - t0)


ORACLE_LADDER = (1, 2, 3, 4, 5, 8, 10, 17, 36, 64, 100, 257, 500, 1000)


def criterion_3() -> CriterionResult:
    t0 = time.perf_counter()
    mismatches = []
    for name, desc in shipped_groups().items():
        for X in ORACLE_LADDER:
            got, want = count_height_ball(desc, X), naive_height_ball(desc, X)
            if got != want:
                mismatches.append(f"hball {name} X={X}: {got} != {want}")
        for X in (2, 10, 100, 1000):
            for a in ((1, 1), (1, -1), (2, 3)):
                row = census_nondegenerate(desc, a, X)
                good, bad = naive_nondegenerate(desc, a, X)
                if row.count != good:
                    mismatches.append(f"census {name} a={a} X={X}: {row.count} != {good}")
    u4 = count_height_ball(shipped_groups()["U_{inf,2}^2"], 4)
    ok = not mismatches and u4 == 76
    detail = f"|H(4)|={u4}; " + ("all counts equal brute force" if not mismatches else "; ".join(mismatches[:3]))
    return CriterionResult(3, "census oracle equivalence", ok, detail, time.perf_counter() - t0)


def criterion_4() -> CriterionResult:
    t0 = time.perf_counter()
    desc = s_unit_group([2], 2)
    _, c = volume_c_gamma(desc)
    ratios = {}
    for e in (16, 64):
        X = 2**e
        ratios[e] = count_height_ball(desc, X) / (c.value * math.log(X) ** 2)
    dt = time.perf_counter() - t0
    ok = 0.85 <= ratios[64] <= 1.15 and abs(ratios[64] - 1) < abs(ratios[16] - 1) and dt < 60
    return CriterionResult(4, "height-ball asymptotics", ok, f"ratio(2^16)={ratios[16]:.4f} ratio(2^64)={ratios[64]:.4f}", dt)


def criterion_5() -> CriterionResult:
    t0 = time.perf_counter()
    desc = shipped_groups()["<(2,1/2)>"]
    n100 = census_nondegenerate(desc, (1, 1), 100).count
    X = 2**64
    row = census_nondegenerate(desc, (1, 1), X)
    ratio = row.count / (math.log(X) / math.log(2))
    ok = n100 == 7 and abs(ratio - 1) <= 0.05 and row.complete
    return CriterionResult(5, "non-degenerate census asymptotics", ok, f"count(100)={n100}, ratio(2^64)={ratio:.4f}", time.perf_counter() - t0)


def criterion_6() -> CriterionResult:
    t0 = time.perf_counter()
    spec = RecurrenceSpec.from_strings([["1"], ["1"]], ["2", "3"])
    try:
        small = count_bounded_terms(spec, 1000)
        big = count_bounded_terms(spec, Fraction(3) ** 40)
    except TailUnstable as exc:
        return CriterionResult(6, "recurrence counts", False, f"TailUnstable: {exc}", time.perf_counter() - t0)
    ok = small.count == 7 and abs(big.count - 40) <= 3 and small.doublings == 0 and big.doublings == 0
    return CriterionResult(6, "recurrence counts", ok, f"count(10^3)={small.count}, count(3^40)={big.count}", time.perf_counter() - t0)


def criterion_7() -> CriterionResult:
    t0 = time.perf_counter()
    gamma1 = analyze_group(1, [("2",)])
    fam = CoefficientFamily.of([("1", "1")])
    n5, _ = count_representable(gamma1, fam, 5)
    pred = predicted_constant(gamma1, fam).constant.value
    ratios = {}
    for e in (16, 32):
        X = 2**e
        n, _ = count_representable(gamma1, fam, X)
        ratios[e] = n / (pred * math.log(X) ** 2)
    ok = (
        n5 == 11
        and abs(pred - 1.5 / math.log(2) ** 2) <= 1e-9
        and abs(ratios[32] - 1) <= 0.30
        and abs(ratios[32] - 1) < abs(ratios[16] - 1)
    )
    detail = f"|T(5)|={n5}, predicted {pred:.4f}, ratio(2^16)={ratios[16]:.4f} ratio(2^32)={ratios[32]:.4f}"
    return CriterionResult(7, "representable values", ok, detail, time.perf_counter() - t0)


def _random_rational(rng: random.Random, size: int = 60) -> Fraction:
    while True:
        n = rng.randint(-size, size)
        if n:
            return Fraction(n, rng.randint(1, size))


def property_failures(cases: int = FUZZ_CASES, seed: int = FUZZ_SEED) -> dict[str, int]:
    """Fuzz the structural identities; returns failure counts per suite."""
    rng = random.Random(seed)
    fails = dict.fromkeys(
        ["product_formula", "height_inequalities", "round_trip", "torsion_divisibility", "subsum_partition", "orbit_identity"], 0
    )
    for _ in range(cases):
        x = _random_rational(rng, 10**6)
        prod = Fraction(1)
        for v in places_of([x]):
            prod *= abs_value(x, v)
        fails["product_formula"] += prod != 1

    for _ in range(cases):
        k = rng.randint(1, 4)
        x = tuple(_random_rational(rng) for _ in range(k))
        y = tuple(_random_rational(rng) for _ in range(k))
        m = rng.randint(0, 5)
        hx, hy = height_vector(x), height_vector(y)
        ok = height_vector(tuple(a * b for a, b in zip(x, y))) <= hx * hy
        ok &= height_vector(tuple(a**m for a in x)) == hx**m
        ok &= height_vector(tuple(1 / a for a in x)) <= hx**k
        ok &= height_by_places(x) == hx
        fails["height_inequalities"] += not ok

    groups = list(shipped_groups().values()) + [analyze_group(3, [("-6", "1/5", "2"), ("3", "3", "-1/7")])]
    for _ in range(cases):
        desc = rng.choice(groups)
        t = rng.randrange(desc.torsion_order)
        z = tuple(rng.randint(-20, 20) for _ in range(desc.rank))
        zeta, z2 = decompose_element(desc, compose_element(desc, t, z))
        fails["round_trip"] += (zeta, z2) != (desc.torsion[t], z)

    for desc in groups[:3]:
        heights = sorted(height_vector(x) for _, x in naive_points(desc, 6))
        for _ in range(cases // 3 + 1):
            X = rng.randint(1, 5000)
            n = sum(1 for h in heights if h <= X)
            fails["torsion_divisibility"] += n % desc.torsion_order != 0

    cfg = CensusConfig()
    small = [g for g in groups[:3] if g.rank == 1]
    for _ in range(cases):
        desc = rng.choice(small)
        a = tuple(Fraction(rng.choice([-1, 1]) * rng.randint(1, 4), rng.randint(1, 3)) for _ in range(desc.k))
        X = rng.randint(1, 400)
        row = census_nondegenerate(desc, a, X, cfg)
        fails["subsum_partition"] += row.count + row.degenerate_count != count_unfiltered(desc, a, X, cfg)

    for _ in range(cases):
        k = rng.randint(1, 5)
        a = tuple(Fraction(rng.randint(1, 3)) for _ in range(k))
        orbit, stab = permutation_orbit(a)
        fails["orbit_identity"] += len(orbit) * stab != math.factorial(k)
    return fails


def criterion_8() -> CriterionResult:
    t0 = time.perf_counter()
    fails = property_failures()
    ok = not any(fails.values())
    detail = ", ".join(f"{k}={v}" for k, v in fails.items()) + f" failures over {FUZZ_CASES} cases each"
    return CriterionResult(8, "property suites", ok, detail, time.perf_counter() - t0)


DETERMINISM_CONFIG = """\
k = 2
generators = [["2", "1/2"]]
a = ["1", "1"]
ladder = ["100", "10000", "100000000"]
seed = 951021
"""


def criterion_9() -> CriterionResult:
    from .cli import load_config, run

    t0 = time.perf_counter()
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        cfg_path = Path(tmp) / "census.toml"
        cfg_path.write_text(DETERMINISM_CONFIG)
        for i in range(2):
            out = Path(tmp) / f"run{i}"
            run(load_config("census", cfg_path, out, None))
            blobs.append((out / "report.json").read_bytes())
    ok = blobs[0] == blobs[1] and json.loads(blobs[0])["seed"] == 951021
    return CriterionResult(9, "deterministic reports", ok, f"{len(blobs[0])} bytes, identical={blobs[0] == blobs[1]}", time.perf_counter() - t0)


CRITERIA: list[Callable[[], CriterionResult]] = [
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
]


def run_all(verbose: bool = True) -> bool:
    all_ok = True
    for crit in CRITERIA:
        try:
            res = crit()
        except Exception as exc:  # a crash is a failed criterion, not a crashed selftest
            res = CriterionResult(CRITERIA.index(crit) + 1, crit.__name__, False, f"{type(exc).__name__}: {exc}")
        all_ok &= res.passed
        if verbose:
            print(res.line(), flush=True)
    return all_ok
