"""Height forms, the polytope C(Gamma), its volume and the closed-form constants.

For ``x = zeta * u_1**z_1 * ... * u_r**z_r`` the log height is the max-plus
expression ``h(z) = sum_v max(0, l_v1(z), ..., l_vk(z))`` where
``l_vj(z) = sum_i z_i * log||u_ij||_v``.  The region ``h <= 1`` is a bounded
convex polytope.  Its volume is computed by splitting it into cells, one per
choice of the maximizing index at every place; each cell is an ordinary
H-polytope whose vertices are enumerated from facet intersections and whose
volume comes from a Delaunay triangulation (Qhull).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .errors import InputError, NumericallyDegenerate, RankZero
from .heights import INFINITY, Place
from .lognumber import ZERO, LogNumber, sign_of
from .multgroup import GroupDescriptor, analyze_group, s_unit_generators

DEFAULT_SEED = 0xE5EED
MC_SAMPLES = 10**6
REL_TOL = 1e-9

CELL_TRIANGULATION = "CellTriangulation"
MONTE_CARLO = "MonteCarlo"
CLOSED_FORM = "ClosedForm"


@dataclass(frozen=True)
class VolumeResult:
    """A volume-like quantity with an error estimate.

    Closed forms carry ``exact_coefficient`` and ``log_powers``: the value is
    ``exact_coefficient * prod((log p) ** e for p, e in log_powers)``.
    """

    value: float
    abs_error_estimate: float
    method: str
    cells_used: int = 0
    exact_coefficient: Fraction | None = None
    log_powers: tuple[tuple[int, int], ...] = ()
    cross_check: "VolumeResult | None" = None

    def scaled(self, factor: Fraction | int) -> "VolumeResult":
        f = Fraction(factor)
        return VolumeResult(
            value=self.value * float(f),
            abs_error_estimate=self.abs_error_estimate * abs(float(f)),
            method=self.method,
            cells_used=self.cells_used,
            exact_coefficient=None if self.exact_coefficient is None else self.exact_coefficient * f,
            log_powers=self.log_powers,
            cross_check=None if self.cross_check is None else self.cross_check.scaled(f),
        )

    def agrees_with(self, other: "VolumeResult") -> bool:
        return abs(self.value - other.value) <= self.abs_error_estimate + other.abs_error_estimate


# --------------------------------------------------------------------------- height form


@dataclass(frozen=True)
class HeightForm:
    """The linear forms ``l_vj``; ``forms[v][j][i]`` is the coefficient of ``z_i``."""

    support: tuple[Place, ...]
    k: int
    r: int
    forms: tuple[tuple[tuple[LogNumber, ...], ...], ...]

    def form(self, v: Place, j: int) -> tuple[LogNumber, ...]:
        """Coefficients of ``l_vj``; ``j`` is 1-based and ``j = 0`` is the zero form."""
        if j == 0:
            return tuple(ZERO for _ in range(self.r))
        return self.forms[self.support.index(v)][j - 1]

    def value_at(self, v: Place, j: int, z: Sequence[int]) -> LogNumber:
        out = ZERO
        for zi, coeff in zip(z, self.form(v, j)):
            if zi:
                out = out + coeff.scale(zi)
        return out

    def evaluate(self, z: Sequence[int]) -> LogNumber:
        """Exact log height ``h(z)``."""
        total = ZERO
        for v in self.support:
            best = ZERO
            for j in range(1, self.k + 1):
                val = self.value_at(v, j, z)
                if sign_of(val - best) > 0:
                    best = val
            total = total + best
        return total

    def formal_sums(self) -> list[tuple[LogNumber, ...]]:
        """``sum_v l_vj`` coefficientwise for each j (all zero by the product formula)."""
        out = []
        for j in range(1, self.k + 1):
            acc = [ZERO] * self.r
            for v in self.support:
                acc = [a + c for a, c in zip(acc, self.form(v, j))]
            out.append(tuple(acc))
        return out

    def matrix(self) -> np.ndarray:
        """Float array of shape ``(|S|, k, r)``."""
        a = np.zeros((len(self.support), self.k, self.r))
        for vi, per_v in enumerate(self.forms):
            for j, coeffs in enumerate(per_v):
                for i, c in enumerate(coeffs):
                    a[vi, j, i] = float(c)
        return a


def height_form(desc: GroupDescriptor) -> HeightForm:
    if desc.rank < 1:
        raise RankZero("height form needs rank >= 1")
    logs = desc.log_abs_matrix()
    forms = []
    for v in desc.support:
        per_v = []
        for j in range(desc.k):
            per_v.append(tuple(logs[v][i][j] for i in range(desc.rank)))
        forms.append(tuple(per_v))
    return HeightForm(support=desc.support, k=desc.k, r=desc.rank, forms=tuple(forms))


def eval_log_height_float(forms: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Vectorized ``h`` for float forms of shape ``(nS, k, r)`` and points of shape ``(N, r)``."""
    vals = np.einsum("vjr,nr->nvj", forms, xi)
    return np.maximum(vals.max(axis=2), 0.0).sum(axis=1)


# --------------------------------------------------------------------------- regulator & closed forms


def regulator_S(primes: Sequence[int], drop: Place = INFINITY) -> VolumeResult:
    """S-regulator over Q for ``S = {inf} + primes``.

    The determinant is taken over the places of ``S`` other than ``drop``;
    the fundamental S-units are the primes themselves.
    """
    primes = sorted(set(int(p) for p in primes))
    if not primes:
        raise InputError("regulator needs at least one prime (rank of U_S is |S| - 1)")
    places = [INFINITY] + [Place(p) for p in primes]
    if drop not in places:
        raise InputError(f"{drop} is not in S")
    rows = [v for v in places if v != drop]
    m = np.zeros((len(rows), len(primes)))
    for a, v in enumerate(rows):
        for b, p in enumerate(primes):
            m[a, b] = math.log(p) if v.is_archimedean else (-math.log(p) if v.p == p else 0.0)
    det = abs(float(np.linalg.det(m)))
    exact = math.prod(math.log(p) for p in primes)
    return VolumeResult(
        value=exact,
        abs_error_estimate=abs(det - exact) + 1e-15 * exact,
        method=CLOSED_FORM,
        exact_coefficient=Fraction(1),
        log_powers=tuple((p, 1) for p in primes),
    )


def everest_volume(s: int, k: int) -> Fraction:
    if s < 1 or k < 1:
        raise InputError("everest_volume needs s >= 1 and k >= 1")
    f = math.factorial
    return Fraction(f((k + 1) * s), f(k * s) * f(s) ** (k + 1))


def c_USk_closed(primes: Sequence[int], k: int) -> VolumeResult:
    """``omega^k / R_S^k * vol(E_{s,k})`` with ``omega = 2`` for Q."""
    primes = sorted(set(int(p) for p in primes))
    if not primes:
        raise InputError("c(U_S^k) needs at least one prime")
    if k < 1:
        raise InputError("k must be positive")
    reg = regulator_S(primes)
    coeff = Fraction(2) ** k * everest_volume(len(primes), k)
    value = float(coeff) / reg.value**k
    return VolumeResult(
        value=value,
        abs_error_estimate=4e-16 * value * (k * len(primes) + 1),
        method=CLOSED_FORM,
        exact_coefficient=coeff,
        log_powers=tuple((p, -k) for p in primes),
    )


def everest_forms(s: int, k: int) -> np.ndarray:
    """Forms of the Everest polytope in ``R^{ks}``; place 0 carries minus the column sums."""
    r = s * k
    a = np.zeros((s + 1, k, r))
    for i in range(1, s + 1):
        for j in range(k):
            col = (i - 1) * k + j
            a[i, j, col] = 1.0
            a[0, j, col] = -1.0
    return a


def everest_polytope_volume(s: int, k: int) -> VolumeResult:
    return maxplus_volume(everest_forms(s, k))


# --------------------------------------------------------------------------- cells


@dataclass(frozen=True)
class Cell:
    """``{xi : A xi <= b}`` for one selector; ``vertices`` as an ``(m, r)`` array."""

    selector: tuple[int, ...]
    A: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    vertices: np.ndarray = field(repr=False)
    inradius: float
    volume: float
    residual: float


def _cell_constraints(forms: np.ndarray, selector: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    n_places, k, r = forms.shape
    full = np.concatenate([np.zeros((n_places, 1, r)), forms], axis=1)
    rows, rhs = [], []
    total = np.zeros(r)
    for v, sel in enumerate(selector):
        top = full[v, sel]
        # identical forms tile the same region; only the lowest index may be selected
        if any(not np.any(full[v, j] != top) for j in range(sel)):
            return np.zeros((1, r)), np.array([-1.0])
        total += top
        for j in range(k + 1):
            if j != sel:
                rows.append(full[v, j] - top)
                rhs.append(0.0)
    rows.append(total)
    rhs.append(1.0)
    A = np.array(rows)
    b = np.array(rhs)
    keep = np.linalg.norm(A, axis=1) > 0
    if not np.all(b[~keep] >= 0):
        return np.zeros((1, r)), np.array([-1.0])
    return A[keep], b[keep]


def _chebyshev_radius(A: np.ndarray, b: np.ndarray, cap: float = 1.0) -> float:
    """Radius of the largest ball inside ``{A xi <= b}``, capped; ``-1`` if infeasible."""
    if A.size == 0:
        return cap
    r = A.shape[1]
    norms = np.linalg.norm(A, axis=1)
    c = np.zeros(r + 1)
    c[-1] = -1.0
    A_ub = np.hstack([A, norms[:, None]])
    bounds = [(None, None)] * r + [(None, cap)]
    res = linprog(c, A_ub=A_ub, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        return -1.0
    return float(res.x[-1])


def _enumerate_vertices(A: np.ndarray, b: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    r = A.shape[1]
    tol = REL_TOL * max(scale, 1.0)
    found: list[np.ndarray] = []
    worst = 0.0
    for rows in itertools.combinations(range(A.shape[0]), r):
        M = A[list(rows)]
        if np.linalg.matrix_rank(M, tol=REL_TOL * np.abs(M).max()) < r:
            continue
        x = np.linalg.solve(M, b[list(rows)])
        slack = A @ x - b
        if np.all(slack <= tol * (1 + np.linalg.norm(A, axis=1) * np.abs(x).max())):
            if not any(np.allclose(x, y, rtol=0, atol=tol * 10) for y in found):
                found.append(x)
                worst = max(worst, float(max(slack.max(), 0.0)))
    return (np.array(found) if found else np.zeros((0, r))), worst


def _simplex_volume_of(points: np.ndarray) -> float:
    r = points.shape[1]
    if r == 1:
        return float(points.max() - points.min())
    return float(ConvexHull(points).volume)


def maxplus_cells(forms: np.ndarray) -> list[Cell]:
    """Full-dimensional cells of ``{sum_v max(0, l_v1, ..., l_vk) <= 1}``, sorted by selector."""
    n_places, k, r = forms.shape
    scale = float(np.abs(forms).max()) if forms.size else 1.0
    cells = []
    for selector in itertools.product(range(k + 1), repeat=n_places):
        A, b = _cell_constraints(forms, selector)
        rad = _chebyshev_radius(A, b)
        if rad <= REL_TOL / max(scale, 1e-300):
            continue
        if rad >= 1.0 and _chebyshev_radius(A, b, cap=1e6) >= 1e6 - 1:
            raise NumericallyDegenerate(f"cell {selector} is unbounded")
        verts, resid = _enumerate_vertices(A, b, scale)
        if len(verts) < r + 1:
            raise NumericallyDegenerate(f"cell {selector} has only {len(verts)} vertices in dimension {r}")
        cells.append(
            Cell(
                selector=tuple(selector),
                A=A,
                b=b,
                vertices=verts,
                inradius=rad,
                volume=_simplex_volume_of(verts),
                residual=resid,
            )
        )
    return cells


def cells_overlap(c1: Cell, c2: Cell, tol: float = 1e-9) -> bool:
    """True when the two cells share interior points."""
    A = np.vstack([c1.A, c2.A])
    b = np.concatenate([c1.b, c2.b])
    return _chebyshev_radius(A, b) > tol


def maxplus_volume(forms: np.ndarray) -> VolumeResult:
    cells = maxplus_cells(forms)
    r = forms.shape[2]
    total = math.fsum(c.volume for c in cells)
    err = 0.0
    for c in cells:
        err += c.volume * (r * c.residual / c.inradius + 64 * np.finfo(float).eps * len(c.vertices))
    return VolumeResult(value=total, abs_error_estimate=float(err), method=CELL_TRIANGULATION, cells_used=len(cells))


def maxplus_box(forms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cells = maxplus_cells(forms)
    allv = np.vstack([c.vertices for c in cells])
    return allv.min(axis=0), allv.max(axis=0)


def monte_carlo_volume(
    forms: np.ndarray, samples: int = MC_SAMPLES, seed: int = DEFAULT_SEED, chunk: int = 200_000
) -> VolumeResult:
    lo, hi = maxplus_box(forms)
    lo = lo - 1e-9
    hi = hi + 1e-9
    box = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        pts = lo + (hi - lo) * rng.random((n, forms.shape[2]))
        hits += int(np.count_nonzero(eval_log_height_float(forms, pts) <= 1.0))
        done += n
    p = hits / samples
    # 4 sigma binomial band
    err = 4.0 * box * math.sqrt(max(p * (1 - p), 1.0 / samples) / samples)
    return VolumeResult(value=box * p, abs_error_estimate=err, method=MONTE_CARLO)


# --------------------------------------------------------------------------- group-level API


@lru_cache(maxsize=64)
def _group_forms(desc: GroupDescriptor) -> np.ndarray:
    return height_form(desc).matrix()


def cell_decomposition(desc: GroupDescriptor) -> list[Cell]:
    return maxplus_cells(_group_forms(desc))


@lru_cache(maxsize=64)
def polytope_box(desc: GroupDescriptor) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Coordinatewise bounds of C(Gamma)."""
    lo, hi = maxplus_box(_group_forms(desc))
    return tuple(map(float, lo)), tuple(map(float, hi))


@lru_cache(maxsize=64)
def volume_c_gamma(
    desc: GroupDescriptor, mc_samples: int = MC_SAMPLES, seed: int = DEFAULT_SEED
) -> tuple[VolumeResult, VolumeResult]:
    """``(mu(C(Gamma)), c(Gamma))``, triangulated, with a Monte Carlo cross-check attached."""
    if desc.rank < 1:
        raise RankZero("c(Gamma) is defined for rank >= 1")
    forms = _group_forms(desc)
    tri = maxplus_volume(forms)
    if mc_samples:
        mc = monte_carlo_volume(forms, samples=mc_samples, seed=seed)
        if not tri.agrees_with(mc):
            raise NumericallyDegenerate(
                f"triangulated volume {tri.value} disagrees with Monte Carlo {mc.value} +- {mc.abs_error_estimate}"
            )
        tri = VolumeResult(tri.value, tri.abs_error_estimate, tri.method, tri.cells_used, cross_check=mc)
    return tri, tri.scaled(desc.torsion_order)


def s_unit_group(primes: Sequence[int], k: int) -> GroupDescriptor:
    return analyze_group(k, s_unit_generators(primes, k))
