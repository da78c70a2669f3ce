"""Exact lattice-point censuses over a group Gamma and comparison with c(Gamma)(log X)^r.

Every counted point passes an exact rational test.  Floating point is only
used to size the box of exponent vectors that gets scanned, and that box is
always widened by ``box_margin``.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DegenerateCoefficient, InputError, InsufficientData, RankZero, ZeroFunctional
from .heights import Place, as_tuple, height_scalar, height_vector, abs_value, parse_rational
from .logspace import VolumeResult, _group_forms, eval_log_height_float, polytope_box
from .multgroup import GroupDescriptor, compose_element

C_BOX_LOG2 = 10  # C_box = 2**10


@dataclass(frozen=True)
class CensusConfig:
    slack_delta: float = 0.25
    box_margin: int = 4
    stability_rounds: int = 2
    parallel_chunks: int = 1

    def __post_init__(self):
        if self.slack_delta < 0 or self.box_margin < 0:
            raise InputError("slack_delta and box_margin must be non-negative")
        if self.stability_rounds < 1 or self.parallel_chunks < 1:
            raise InputError("stability_rounds and parallel_chunks must be at least 1")

    def domain_bounds(self, log_x: float) -> list[float]:
        """Log-height bounds of the nested enumeration domains, smallest first."""
        log_cbox = C_BOX_LOG2 * math.log(2)
        return [
            (t + 1) * log_cbox + (1 + self.slack_delta * (t + 1)) * log_x
            for t in range(self.stability_rounds + 1)
        ]


@dataclass(frozen=True)
class CensusRow:
    X: Fraction
    count: int
    degenerate_count: int = 0
    complete: bool = True
    ratio: float | None = None


@dataclass
class FitReport:
    ratios: list[float]
    slope: float
    final_ratio: float
    monotone: bool
    tolerance: float
    passed: bool
    notes: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _check_rank(desc: GroupDescriptor) -> None:
    if desc.rank < 1:
        raise RankZero("census operations need a group of rank >= 1")


def _check_x(X) -> Fraction:
    X = parse_rational(X)
    if X < 1:
        raise InputError(f"X must be at least 1, got {X}")
    return X


def exponent_box(desc: GroupDescriptor, log_bound: float, margin: int) -> list[range]:
    """Integer ranges covering ``log_bound * C(Gamma)``, widened by ``margin``."""
    lo, hi = polytope_box(desc)
    return [
        range(math.floor(a * log_bound) - margin, math.ceil(b * log_bound) + margin + 1)
        for a, b in zip(lo, hi)
    ]


def _split(ranges: list[range], chunks: int) -> list[list[range]]:
    first = ranges[0]
    n = max(1, min(chunks, len(first)))
    step = math.ceil(len(first) / n)
    return [
        [range(first.start + i, min(first.start + i + step, first.stop))] + ranges[1:]
        for i in range(0, len(first), step)
    ]


def _run_chunked(fn: Callable, ranges: list[range], chunks: int, *args):
    """Apply ``fn(sub_ranges, *args)`` over a split of the box and sum the tuple results."""
    parts = _split(ranges, chunks)
    if chunks > 1 and len(parts) > 1:
        with ProcessPoolExecutor(max_workers=chunks) as pool:
            results = list(pool.map(fn, parts, *[[a] * len(parts) for a in args]))
    else:
        results = [fn(p, *args) for p in parts]
    return tuple(sum(col) for col in zip(*results))


# --------------------------------------------------------------------------- height ball


def _ball_chunk(ranges, desc, X):
    n = 0
    for z in itertools.product(*ranges):
        if height_vector(compose_element(desc, 0, z)) <= X:
            n += 1
    return (n,)


def count_height_ball(desc: GroupDescriptor, X, cfg: CensusConfig = CensusConfig()) -> int:
    """``|{x in Gamma : H(x) <= X}|`` exactly."""
    _check_rank(desc)
    X = _check_x(X)
    ranges = exponent_box(desc, math.log(X), cfg.box_margin)
    (lattice,) = _run_chunked(_ball_chunk, ranges, cfg.parallel_chunks, desc, X)
    return lattice * desc.torsion_order


def _ball_points(desc: GroupDescriptor, X: Fraction, margin: int) -> Iterable[tuple]:
    """Group elements of height at most X, all torsion included."""
    for z in itertools.product(*exponent_box(desc, math.log(X), margin)):
        base = compose_element(desc, 0, z)
        if height_vector(base) <= X:
            for t in desc.torsion:
                yield tuple(a * b for a, b in zip(t, base))


def count_in_subspace(desc: GroupDescriptor, b: Sequence, X, cfg: CensusConfig = CensusConfig()) -> int:
    """Points of the height ball lying on the hyperplane ``sum b_i x_i = 0``."""
    _check_rank(desc)
    X = _check_x(X)
    b = as_tuple(b)
    if len(b) != desc.k:
        raise InputError(f"functional needs {desc.k} entries")
    if all(c == 0 for c in b):
        raise ZeroFunctional("all coefficients of the functional are zero")
    return sum(1 for x in _ball_points(desc, X, cfg.box_margin) if sum(c * e for c, e in zip(b, x)) == 0)


def count_ratio_window(
    desc: GroupDescriptor, X, w: Place, i: int, j: int, c1, c2, cfg: CensusConfig = CensusConfig()
) -> int:
    """Points of the height ball with ``c1 <= ||x_i||_w / ||x_j||_w <= c2`` (``x_0 = 1``)."""
    _check_rank(desc)
    X = _check_x(X)
    c1, c2 = parse_rational(c1), parse_rational(c2)
    n = 0
    for x in _ball_points(desc, X, cfg.box_margin):
        full = (Fraction(1),) + x
        q = abs_value(full[i], w) / abs_value(full[j], w)
        if c1 <= q <= c2:
            n += 1
    return n


# --------------------------------------------------------------------------- non-degenerate census


def _subsums(terms: Sequence[Fraction]) -> Iterable[Fraction]:
    k = len(terms)
    for mask in range(1, 1 << k):
        yield sum(terms[i] for i in range(k) if mask >> i & 1)


def _nondeg_chunk(ranges, desc, a, X, bounds, forms):
    rounds = len(bounds)
    counts = [0] * rounds
    degens = [0] * rounds
    zs = np.array(list(itertools.product(*ranges)), dtype=float)
    if zs.size == 0:
        return tuple(counts + degens)
    hs = eval_log_height_float(forms, zs)
    top = bounds[-1] * (1 + 1e-12) + 1e-9
    for z, h in zip(itertools.product(*ranges), hs):
        if h > top:
            continue
        first_round = next(t for t, bnd in enumerate(bounds) if h <= bnd * (1 + 1e-12) + 1e-9 or t == rounds - 1)
        base = compose_element(desc, 0, z)
        for tors in desc.torsion:
            terms = [ai * ti * bi for ai, ti, bi in zip(a, tors, base)]
            total = sum(terms)
            if height_scalar(total) > X:
                continue
            degenerate = any(s == 0 for s in _subsums(terms))
            for t in range(first_round, rounds):
                if degenerate:
                    degens[t] += 1
                else:
                    counts[t] += 1
    return tuple(counts + degens)


def _nondeg_counts(desc, a, X, cfg, bounds):
    ranges = exponent_box(desc, bounds[-1], cfg.box_margin)
    res = _run_chunked(_nondeg_chunk, ranges, cfg.parallel_chunks, desc, a, X, bounds, _group_forms(desc))
    n = len(bounds)
    return list(res[:n]), list(res[n:])


def census_nondegenerate(desc: GroupDescriptor, a: Sequence, X, cfg: CensusConfig = CensusConfig()) -> CensusRow:
    """Count ``x`` with ``H(sum a_i x_i) <= X`` and no vanishing subsum.

    The scan covers nested heuristic domains ``h(x) <= B_t``; the row is
    ``complete`` when every enlargement leaves the count unchanged.  The
    reported numbers are those of the largest domain.
    """
    _check_rank(desc)
    X = _check_x(X)
    a = as_tuple(a)
    if len(a) != desc.k:
        raise InputError(f"coefficient tuple needs {desc.k} entries")
    if desc.k < 2:
        raise InputError("census_nondegenerate needs k >= 2")
    if any(c == 0 for c in a):
        raise DegenerateCoefficient("all coefficients a_i must be non-zero")
    bounds = cfg.domain_bounds(math.log(X))
    counts, degens = _nondeg_counts(desc, a, X, cfg, bounds)
    # degenerate points can be infinite in number (e.g. x_1 = x_2, a = (1, -1)); only
    # the non-degenerate count has to stabilize
    complete = len(set(counts)) == 1
    return CensusRow(X=X, count=counts[-1], degenerate_count=degens[-1], complete=complete)


def count_unfiltered(desc: GroupDescriptor, a: Sequence, X, cfg: CensusConfig = CensusConfig()) -> int:
    """Points of the largest census domain passing only the height test."""
    X = _check_x(X)
    a = as_tuple(a)
    bounds = cfg.domain_bounds(math.log(X))
    n = 0
    for z in itertools.product(*exponent_box(desc, bounds[-1], cfg.box_margin)):
        h = float(eval_log_height_float(_group_forms(desc), np.array([z], dtype=float))[0])
        if h > bounds[-1] * (1 + 1e-12) + 1e-9:
            continue
        base = compose_element(desc, 0, z)
        for tors in desc.torsion:
            if height_scalar(sum(ai * ti * bi for ai, ti, bi in zip(a, tors, base))) <= X:
                n += 1
    return n


# --------------------------------------------------------------------------- fits


def asymptotic_report(rows: Sequence[CensusRow], r: int, c: VolumeResult | float, tol: float = 0.15) -> FitReport:
    """Ratios ``count / (c (log X)^r)``, a log-log slope, and a verdict."""
    if len(rows) < 3:
        raise InsufficientData("asymptotic_report needs at least 3 rows")
    xs = [Fraction(row.X) for row in rows]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise InsufficientData("rows must have strictly increasing X")
    if any(x <= 1 for x in xs):
        raise InsufficientData("asymptotic comparison needs X > 1")
    cval = c.value if isinstance(c, VolumeResult) else float(c)
    logs = [math.log(x) for x in xs]
    ratios = [row.count / (cval * lx**r) for row, lx in zip(rows, logs)]
    notes = []

    pts = [(math.log(lx), math.log(row.count)) for row, lx in zip(rows, logs) if row.count > 0 and lx > 1]
    if len(pts) >= 2:
        slope = float(np.polyfit([p[0] for p in pts], [p[1] for p in pts], 1)[0])
    else:
        slope = 0.0
        notes.append("too few positive counts for a slope fit")

    dev = [abs(q - 1) for q in ratios[-3:]]
    monotone = all(b <= a for a, b in zip(dev, dev[1:]))
    final = ratios[-1]
    passed = abs(final - 1) <= tol and monotone
    if not monotone:
        notes.append("ratios do not approach 1 monotonically on the last three rungs")
    if abs(final - 1) > tol:
        notes.append(f"final ratio {final:.4f} outside [1-{tol}, 1+{tol}]")
    return FitReport(ratios=ratios, slope=slope, final_ratio=final, monotone=monotone, tolerance=tol, passed=passed, notes=notes)
