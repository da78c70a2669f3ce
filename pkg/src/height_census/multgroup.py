"""Finitely generated subgroups of (Q*)^k.

An element ``x`` of (Q*)^k is encoded by its exponent vector: the exponents
``ord_p(x_j)`` for every support prime ``p`` (ascending) and coordinate ``j``,
followed by one sign bit per coordinate.  The group generated by a list of
tuples is then the integer row lattice spanned by their exponent vectors
together with ``2 * e_j`` on every sign column.  A row Hermite normal form of
that lattice, with the prime columns in front, splits off a basis of the free
part (rows pivoting in a prime column) from the torsion (rows pivoting in a
sign column).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import IndexOutOfRange, InvalidTuple, NotInGroup
from .heights import INFINITY, Place, TupleK, as_tuple, factor_rational, require_nonzero_tuple
from .lognumber import LogNumber


def hermite_normal_form(rows: list[list[int]]) -> list[list[int]]:
    """Row-style HNF: echelon rows, positive pivots, entries above pivots reduced mod the pivot.

    Zero rows are dropped.
    """
    a = [list(r) for r in rows if any(r)]
    if not a:
        return []
    ncols = len(a[0])
    pivot_row = 0
    for col in range(ncols):
        if pivot_row >= len(a):
            break
        # Euclid on the column until at most one nonzero entry remains below pivot_row
        while True:
            nonzero = [i for i in range(pivot_row, len(a)) if a[i][col] != 0]
            if not nonzero:
                break
            best = min(nonzero, key=lambda i: abs(a[i][col]))
            a[pivot_row], a[best] = a[best], a[pivot_row]
            piv = a[pivot_row][col]
            done = True
            for i in range(pivot_row + 1, len(a)):
                if a[i][col] != 0:
                    q = a[i][col] // piv
                    a[i] = [x - q * y for x, y in zip(a[i], a[pivot_row])]
                    if a[i][col] != 0:
                        done = False
            if done:
                break
        if a[pivot_row][col] == 0:
            continue
        if a[pivot_row][col] < 0:
            a[pivot_row] = [-x for x in a[pivot_row]]
        piv = a[pivot_row][col]
        for i in range(pivot_row):
            q = a[i][col] // piv
            if q:
                a[i] = [x - q * y for x, y in zip(a[i], a[pivot_row])]
        pivot_row += 1
    return [r for r in a if any(r)]


def _pivot(row: Sequence[int]) -> int:
    return next(i for i, x in enumerate(row) if x != 0)


@dataclass(frozen=True)
class GroupDescriptor:
    """Result of :func:`analyze_group`; immutable.

    ``basis_exponents[i][p_index][j]`` is ``ord_p(u_ij)`` and ``basis_signs[i][j]``
    the sign bit of ``u_ij``.  ``exponent_lattice`` holds the raw generator
    exponent vectors (prime block, then sign bits).
    """

    k: int
    generators: tuple[TupleK, ...]
    basis: tuple[TupleK, ...]
    torsion: tuple[TupleK, ...]
    support: tuple[Place, ...]
    exponent_lattice: tuple[tuple[int, ...], ...]
    primes: tuple[int, ...]
    basis_exponents: tuple[tuple[tuple[int, ...], ...], ...]
    basis_signs: tuple[tuple[int, ...], ...]

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def torsion_order(self) -> int:
        return len(self.torsion)

    @property
    def identity(self) -> TupleK:
        return tuple(Fraction(1) for _ in range(self.k))

    def log_abs_matrix(self) -> dict[Place, list[list[LogNumber]]]:
        """``log ||u_ij||_v`` as exact log numbers, indexed ``[v][i][j]``."""
        out: dict[Place, list[list[LogNumber]]] = {}
        for v in self.support:
            rows = []
            for exps in self.basis_exponents:
                row = []
                for j in range(self.k):
                    if v.is_archimedean:
                        row.append(LogNumber.from_map({p: exps[pi][j] for pi, p in enumerate(self.primes)}))
                    else:
                        pi = self.primes.index(v.p)
                        row.append(LogNumber.from_map({v.p: -exps[pi][j]}))
                rows.append(row)
            out[v] = rows
        return out


def _exponent_vector(x: TupleK, primes: Sequence[int]) -> tuple[list[int], list[int]] | None:
    """Prime block (row-major by prime) and sign bits; ``None`` if a foreign prime occurs."""
    k = len(x)
    block = [0] * (len(primes) * k)
    index = {p: i for i, p in enumerate(primes)}
    for j, e in enumerate(x):
        for p, n in factor_rational(e).items():
            if p not in index:
                return None
            block[index[p] * k + j] = n
    signs = [1 if e < 0 else 0 for e in x]
    return block, signs


def analyze_group(k: int, gens: Sequence[Sequence]) -> GroupDescriptor:
    generators = tuple(as_tuple(g) for g in gens)
    if k < 1:
        raise InvalidTuple("k must be at least 1")
    for g in generators:
        require_nonzero_tuple(g, k)

    primes: set[int] = set()
    for g in generators:
        for e in g:
            primes.update(factor_rational(e))
    primes_sorted = tuple(sorted(primes))
    n_prime_cols = len(primes_sorted) * k

    lattice_rows = []
    for g in generators:
        block, signs = _exponent_vector(g, primes_sorted)
        lattice_rows.append(tuple(block + signs))
    rows = [list(r) for r in lattice_rows]
    for j in range(k):
        rows.append([0] * n_prime_cols + [2 if i == j else 0 for i in range(k)])
    hnf = hermite_normal_form(rows)

    free_rows = [r for r in hnf if _pivot(r) < n_prime_cols]
    torsion_rows = [r for r in hnf if _pivot(r) >= n_prime_cols]

    basis, basis_exps, basis_signs = [], [], []
    for row in free_rows:
        signs = tuple(s % 2 for s in row[n_prime_cols:])
        exps = tuple(tuple(row[pi * k + j] for j in range(k)) for pi in range(len(primes_sorted)))
        basis.append(_build_element(primes_sorted, exps, signs, k))
        basis_exps.append(exps)
        basis_signs.append(signs)

    span = {tuple([0] * k)}
    for row in torsion_rows:
        bits = tuple(s % 2 for s in row[n_prime_cols:])
        span |= {tuple((a + b) % 2 for a, b in zip(s, bits)) for s in span}
    torsion = tuple(tuple(Fraction(-1 if b else 1) for b in bits) for bits in sorted(span))

    # primes whose exponent column is nonzero for some basis element
    used = sorted(
        p for pi, p in enumerate(primes_sorted) if any(any(exps[pi]) for exps in basis_exps)
    )
    support = (INFINITY,) + tuple(Place(p) for p in used)

    return GroupDescriptor(
        k=k,
        generators=generators,
        basis=tuple(basis),
        torsion=torsion,
        support=support,
        exponent_lattice=tuple(lattice_rows),
        primes=primes_sorted,
        basis_exponents=tuple(basis_exps),
        basis_signs=tuple(basis_signs),
    )


def _build_element(primes, exps, signs, k) -> TupleK:
    out = []
    for j in range(k):
        num = den = 1
        for pi, p in enumerate(primes):
            e = exps[pi][j]
            if e > 0:
                num *= p**e
            elif e < 0:
                den *= p**-e
        out.append(Fraction(-num if signs[j] else num, den))
    return tuple(out)


def compose_element(desc: GroupDescriptor, zeta: int, z: Sequence[int]) -> TupleK:
    """``torsion[zeta] * prod(u_i ** z_i)``."""
    if not 0 <= zeta < len(desc.torsion):
        raise IndexOutOfRange(f"torsion index {zeta} out of range 0..{len(desc.torsion) - 1}")
    if len(z) != desc.rank:
        raise IndexOutOfRange(f"exponent vector has length {len(z)}, rank is {desc.rank}")
    exps = [[0] * desc.k for _ in desc.primes]
    signs = [1 if t < 0 else 0 for t in desc.torsion[zeta]]
    for zi, bexp, bsign in zip(z, desc.basis_exponents, desc.basis_signs):
        if zi == 0:
            continue
        for pi in range(len(desc.primes)):
            for j in range(desc.k):
                exps[pi][j] += zi * bexp[pi][j]
        for j in range(desc.k):
            signs[j] ^= (zi * bsign[j]) & 1
    return _build_element(desc.primes, exps, signs, desc.k)


def decompose_element(desc: GroupDescriptor, x: Sequence) -> tuple[TupleK, tuple[int, ...]]:
    """Return ``(zeta, z)`` with ``x == zeta * prod(u_i ** z_i)`` or raise :class:`NotInGroup`."""
    x = as_tuple(x)
    require_nonzero_tuple(x, desc.k)
    enc = _exponent_vector(x, desc.primes)
    if enc is None:
        raise NotInGroup(f"{x} involves primes outside the group")
    block, signs = enc
    k = desc.k
    residual = list(block)
    z = []
    for bexp in desc.basis_exponents:
        row = [bexp[pi][j] for pi in range(len(desc.primes)) for j in range(k)]
        c = _pivot(row)
        q, rem = divmod(residual[c], row[c])
        if rem:
            raise NotInGroup(f"{x} is not in the group")
        residual = [a - q * b for a, b in zip(residual, row)]
        z.append(q)
    if any(residual):
        raise NotInGroup(f"{x} is not in the group")
    for zi, bsign in zip(z, desc.basis_signs):
        signs = [(s + zi * b) % 2 for s, b in zip(signs, bsign)]
    zeta = tuple(Fraction(-1 if b else 1) for b in signs)
    if zeta not in desc.torsion:
        raise NotInGroup(f"{x} has a sign pattern outside the group")
    return zeta, tuple(z)


def in_group(desc: GroupDescriptor, x: Sequence) -> bool:
    try:
        decompose_element(desc, x)
    except NotInGroup:
        return False
    return True


def check_ratio_condition(desc: GroupDescriptor) -> dict[tuple[int, int], bool]:
    """For each ordered pair ``(i, j)`` (1-based): does some element have ``x_i/x_j != ±1``?"""
    out = {}
    for i, j in itertools.permutations(range(desc.k), 2):
        out[(i + 1, j + 1)] = any(
            any(exps[pi][i] != exps[pi][j] for pi in range(len(desc.primes)))
            for exps in desc.basis_exponents
        )
    return out


def check_place_separation(desc: GroupDescriptor) -> dict[tuple[Place, int, int], bool]:
    """For ``v`` in the support and ``i != j`` in ``0..k`` (coordinate 0 is the constant 1),
    is there an element with ``||x_i||_v != ||x_j||_v``?"""
    logs = desc.log_abs_matrix()
    out = {}
    for v in desc.support:
        for i, j in itertools.permutations(range(desc.k + 1), 2):
            differs = False
            for row in logs[v]:
                li = row[i - 1] if i else LogNumber()
                lj = row[j - 1] if j else LogNumber()
                if not (li - lj).is_zero():
                    differs = True
                    break
            out[(v, i, j)] = differs
    return out


def product_group(gamma1: GroupDescriptor, k: int) -> GroupDescriptor:
    """``Gamma_1^k`` for a subgroup ``Gamma_1`` of Q*."""
    if gamma1.k != 1:
        raise InvalidTuple("product_group expects a subgroup of Q*")
    gens = []
    for g in gamma1.generators:
        for j in range(k):
            gens.append(tuple(g[0] if i == j else Fraction(1) for i in range(k)))
    return analyze_group(k, gens)


def s_unit_generators(primes: Sequence[int], k: int) -> list[TupleK]:
    """Generators of ``U_S^k`` for ``S = {inf} + primes``."""
    gens = []
    for j in range(k):
        for p in list(primes) + [-1]:
            gens.append(tuple(Fraction(p) if i == j else Fraction(1) for i in range(k)))
    return gens
