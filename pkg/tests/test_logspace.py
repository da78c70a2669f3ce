import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from height_census.errors import InputError, RankZero
from height_census.heights import INFINITY, Place, height_vector
from height_census.lognumber import LogNumber, ZERO, compare, log_max, sign_of
from height_census.logspace import (
    cells_overlap,
    c_USk_closed,
    cell_decomposition,
    eval_log_height_float,
    everest_forms,
    everest_polytope_volume,
    everest_volume,
    height_form,
    maxplus_volume,
    monte_carlo_volume,
    polytope_box,
    regulator_S,
    s_unit_group,
    volume_c_gamma,
)
from height_census.multgroup import analyze_group, compose_element

L2, L3 = math.log(2), math.log(3)


def exact_sign(terms):
    """Sign of sum c_p log p from the integer comparison prod p^{c_p>0} vs prod p^{-c_p<0}."""
    num = math.prod(p**c for p, c in terms.items() if c > 0)
    den = math.prod(p ** (-c) for p, c in terms.items() if c < 0)
    return (num > den) - (num < den)


@settings(max_examples=300)
@given(st.dictionaries(st.sampled_from([2, 3, 5, 7, 11, 13]), st.integers(-60, 60), max_size=4))
def test_sign_matches_integer_oracle(terms):
    x = LogNumber.from_map(terms)
    assert sign_of(x) == exact_sign(terms)
    assert x.is_zero() == (exact_sign(terms) == 0)


def test_sign_of_near_cancellation():
    # 3^665 is within a factor ~1.0004 of 2^1054
    x = LogNumber.from_map({3: 665, 2: -1054})
    assert sign_of(x) == exact_sign({3: 665, 2: -1054})
    assert LogNumber.from_terms({4: 1, 2: -2}).is_zero()


def test_compare_and_max():
    a, b = LogNumber.log_of(3), LogNumber.log_of(Fraction(9, 2))
    assert compare(a, b) == -1
    assert log_max([a, b, ZERO]) == b
    assert LogNumber.log_of(Fraction(8, 27)).exp_rational() == Fraction(8, 27)


def test_height_form_examples():
    d = analyze_group(2, [("2", "1/2")])
    hf = height_form(d)
    assert float(hf.form(INFINITY, 1)[0]) == pytest.approx(L2)
    assert float(hf.form(INFINITY, 2)[0]) == pytest.approx(-L2)
    assert float(hf.form(Place(2), 1)[0]) == pytest.approx(-L2)
    assert float(hf.form(Place(2), 2)[0]) == pytest.approx(L2)
    assert float(hf.evaluate((3,))) == pytest.approx(2 * 3 * L2)
    assert hf.evaluate((0,)).is_zero()


def test_height_form_rank_zero():
    with pytest.raises(RankZero):
        height_form(analyze_group(2, [("-1", "1")]))


FUZZ_GROUPS = [
    [("2", "1/2")],
    [("2", "1"), ("1", "2"), ("-1", "1")],
    [("2", "3"), ("5", "1/5")],
    [("-6", "1/5", "2"), ("3", "3", "-1/7")],
    [("2", "1/2"), ("3", "3")],
]


@pytest.mark.parametrize("gens", FUZZ_GROUPS)
def test_log_height_matches_height_vector(gens):
    d = analyze_group(len(gens[0]), gens)
    hf = height_form(d)
    rng = random.Random(11)
    for _ in range(40):
        z = tuple(rng.randint(-6, 6) for _ in range(d.rank))
        x = compose_element(d, rng.randrange(d.torsion_order), z)
        H = height_vector(x)
        h = hf.evaluate(z)
        assert h == LogNumber.log_of(H)
        for X in (H - 1, H, H + 1):
            if X >= 1:
                assert (sign_of(h - LogNumber.log_of(X)) <= 0) == (H <= X)
        assert float(eval_log_height_float(hf.matrix(), np.array([z], dtype=float))[0]) == pytest.approx(math.log(H), abs=1e-9)


@pytest.mark.parametrize("gens", FUZZ_GROUPS)
def test_formal_sums_vanish(gens):
    d = analyze_group(len(gens[0]), gens)
    for row in height_form(d).formal_sums():
        assert all(c.is_zero() for c in row)


def test_single_generator_volume():
    mu, c = volume_c_gamma(analyze_group(2, [("2", "1/2")]))
    assert mu.cells_used == 2
    assert mu.value == pytest.approx(1 / L2, rel=1e-9)
    assert c.value == pytest.approx(1 / L2, rel=1e-9)


def test_s_unit_square_cells_and_constant():
    d = s_unit_group([2], 2)
    cells = cell_decomposition(d)
    mu, c = volume_c_gamma(d)
    assert mu.value == pytest.approx(3 / L2**2, rel=1e-9)
    assert c.value == pytest.approx(c_USk_closed([2], 2).value, rel=1e-6)
    assert c.value == pytest.approx(24.976, abs=1e-3)
    # rasterize: every grid point inside the region lies in exactly one cell
    lo, hi = polytope_box(d)
    forms = np.array(height_form(d).matrix())
    xs = np.linspace(lo[0], hi[0], 61)[1:-1]
    ys = np.linspace(lo[1], hi[1], 61)[1:-1]
    pts = np.array(list(itertools.product(xs, ys)))
    inside = eval_log_height_float(forms, pts) < 1 - 1e-9
    hits = np.zeros(len(pts), dtype=int)
    for cell in cells:
        hits += np.all(pts @ cell.A.T <= cell.b + 1e-12, axis=1)
    strict = np.array([sum(np.all(p @ c.A.T < c.b - 1e-9) for c in cells) for p in pts])
    assert np.all(hits[inside] >= 1)
    assert np.all(strict <= 1)
    assert np.all(hits[~inside & (eval_log_height_float(forms, pts) > 1 + 1e-9)] == 0)


@pytest.mark.parametrize("gens", FUZZ_GROUPS + [[("2", "2")], [("2", "-2"), ("3", "1")]])
def test_cells_disjoint_bounded_and_cross_checked(gens):
    d = analyze_group(len(gens[0]), gens)
    cells = cell_decomposition(d)
    for c1, c2 in itertools.combinations(cells, 2):
        assert not cells_overlap(c1, c2)
    lo, hi = polytope_box(d)
    assert all(math.isfinite(a) and math.isfinite(b) for a, b in zip(lo, hi))
    mu, _ = volume_c_gamma(d)
    mc = monte_carlo_volume(height_form(d).matrix(), samples=400_000, seed=7)
    assert abs(mu.value - mc.value) <= mc.abs_error_estimate + mu.abs_error_estimate


@pytest.mark.parametrize(
    "s,k,expected",
    [(1, 1, 2), (1, 2, 3), (2, 1, 3), (1, 3, 4), (2, 2, Fraction(15, 4)), (3, 1, Fraction(10, 3)), (2, 3, Fraction(7, 2))],
)
def test_everest_volume(s, k, expected):
    assert everest_volume(s, k) == expected
    assert everest_polytope_volume(s, k).value == pytest.approx(float(expected), rel=1e-6)


def test_everest_closed_form_is_multinomial():
    # closed form is the multinomial ((k+1)s)! / ((ks)! (s!)^{k+1})
    for s, k in [(1, 4), (4, 1), (2, 2)]:
        f = math.factorial
        assert everest_volume(s, k) == Fraction(f((k + 1) * s), f(k * s) * f(s) ** (k + 1))
    assert everest_forms(2, 2).shape == (3, 2, 4)


def test_everest_vs_s_unit_group_two_primes():
    d = s_unit_group([2, 3], 2)
    mu, c = volume_c_gamma(d, mc_samples=200_000)
    reg = regulator_S([2, 3]).value
    assert mu.value * reg**2 == pytest.approx(float(everest_volume(2, 2)), rel=1e-6)
    assert c.value == pytest.approx(c_USk_closed([2, 3], 2).value, rel=1e-6)


@pytest.mark.parametrize("primes,k", [([2], 1), ([3], 1), ([2], 3), ([2, 3], 1), ([5], 2)])
def test_closed_form_agreement(primes, k):
    _, c = volume_c_gamma(s_unit_group(primes, k), mc_samples=100_000)
    assert c.value == pytest.approx(c_USk_closed(primes, k).value, rel=1e-6)


def test_regulator_examples():
    assert regulator_S([2]).value == pytest.approx(0.693147, abs=1e-6)
    assert regulator_S([2, 3]).value == pytest.approx(L2 * L3, rel=1e-12)
    assert regulator_S([2, 3]).value == pytest.approx(0.761500, abs=1e-6)
    assert regulator_S([3, 2], drop=Place(3)).value == pytest.approx(L2 * L3)
    with pytest.raises(InputError):
        regulator_S([])


def test_closed_form_small_values():
    assert c_USk_closed([2], 1).value == pytest.approx(4 / L2, rel=1e-12)
    assert c_USk_closed([2], 2).exact_coefficient == 12
    with pytest.raises(InputError):
        c_USk_closed([], 1)


def test_rank_zero_volume():
    with pytest.raises(RankZero):
        volume_c_gamma(analyze_group(1, [("-1",)]))


def test_volume_is_deterministic():
    d = analyze_group(2, [("2", "3"), ("5", "1/5")])
    a = maxplus_volume(height_form(d).matrix())
    b = maxplus_volume(height_form(d).matrix())
    assert a == b
