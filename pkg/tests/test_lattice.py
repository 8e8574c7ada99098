import json
import random
from fractions import Fraction

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from fkglab import codec
from fkglab.lattice import (
    GridFunction,
    GridIndicator,
    LatticeError,
    RectangleFamily,
    StaircaseSeq,
    all_staircases,
    constant,
    count_staircases,
    descents,
    discretize_monotone,
    full,
    has_descent,
    layer_cake,
    perturb,
    product_expect,
    random_staircase,
    random_monotone_function,
    rect_product_expect,
    refine,
    staircase_expect,
    staircase_meet,
    staircase_new,
    subsets_of,
)

from conftest import cell_set, staircases


def S(*vals):
    return staircase_new(len(vals), vals)


class TestStaircaseNew:
    def test_valid(self):
        a = staircase_new(2, (2, 1))
        assert a.values == (2, 1)
        assert a[1] == 2 and a[2] == 1

    def test_full_square(self):
        assert staircase_new(3, (3, 3, 3)) == full(3)
        assert staircase_expect(full(3)) == 1

    def test_increasing_rejected_with_index(self):
        with pytest.raises(LatticeError, match="not weakly decreasing at index 1"):
            staircase_new(2, (1, 2))

    def test_first_offending_index(self):
        with pytest.raises(LatticeError, match="at index 2"):
            staircase_new(4, (3, 2, 3, 4))

    @pytest.mark.parametrize("vals", [(3, 1), (-1, -1), (2, 0, 0)])
    def test_bad_length_or_range(self, vals):
        with pytest.raises(LatticeError):
            staircase_new(2, vals)


def test_meet_examples():
    assert staircase_meet(S(2, 1), S(1, 1)) == S(1, 1)
    assert staircase_meet(S(3, 2, 0), S(2, 2, 1)) == S(2, 2, 0)
    a = S(3, 1, 0)
    assert staircase_meet(a, a) == a


def test_meet_mismatched_m():
    with pytest.raises(LatticeError, match="mismatched resolution"):
        staircase_meet(S(1), S(1, 1))


@given(st.data())
def test_meet_lattice_laws(data):
    m = data.draw(st.integers(1, 5))
    a, b, c = (data.draw(staircases(m=m)) for _ in range(3))
    assert staircase_meet(a, b) == staircase_meet(b, a)
    assert staircase_meet(staircase_meet(a, b), c) == staircase_meet(a, staircase_meet(b, c))
    assert staircase_meet(a, a) == a
    assert staircase_meet(a, full(m)) == a
    # set-level: meet is the intersection of the cell sets
    assert cell_set(staircase_meet(a, b)) == cell_set(a) & cell_set(b)


def test_expect_examples():
    assert staircase_expect(S(2, 1)) == Fraction(3, 4)
    assert staircase_expect(S(0, 0, 0)) == 0
    assert staircase_expect(S(3, 3, 3)) == 1


class TestProductExpect:
    def test_two_staircases(self):
        assert product_expect([S(2, 1), S(1, 1)]) == Fraction(1, 2)

    def test_full_is_identity(self):
        a = S(3, 2, 2, 0)
        assert product_expect([a, full(4)]) == staircase_expect(a)

    def test_disjoint_sets(self):
        b = S(1, 0)
        s = b.indicator().complement()
        assert product_expect([b, s]) == 0

    def test_empty_list(self):
        with pytest.raises(LatticeError):
            product_expect([])

    def test_mismatch(self):
        with pytest.raises(LatticeError, match="mismatched"):
            product_expect([S(1), S(1, 0)])

    @given(st.data())
    def test_matches_set_intersection(self, data):
        m = data.draw(st.integers(1, 5))
        fs = [data.draw(staircases(m=m)) for _ in range(data.draw(st.integers(1, 4)))]
        inter = set.intersection(*map(cell_set, fs))
        assert product_expect(fs) == Fraction(len(inter), m * m)


def test_descents():
    assert descents(S(2, 1)) == [1]
    assert descents(S(3, 3, 3)) == []
    assert descents(S(3, 1, 0)) == [1, 2]


class TestPerturb:
    def test_examples(self):
        assert perturb(S(2, 0), 1, "plus") == S(2, 2)
        assert perturb(S(2, 0), 1, "minus") == S(0, 0)
        assert perturb(S(2, 0), 1, "star") == S(2, 1)

    def test_no_descent(self):
        with pytest.raises(LatticeError, match="no descent at 1"):
            perturb(S(2, 2), 1, "plus")

    def test_unknown_kind(self):
        with pytest.raises(LatticeError):
            perturb(S(2, 0), 1, "twist")

    @given(staircases(max_m=6), st.sampled_from(["minus", "plus", "star"]))
    def test_single_entry_changes(self, a, kind):
        ds = descents(a)
        assume(ds)
        for i in ds:
            b = perturb(a, i, kind)
            assert sum(x != y for x, y in zip(a.values, b.values)) == 1


@given(st.data())
def test_star_meet_unchanged(data):
    """a* b = ab when a, b share a descent at i and b_{i+1} <= a_{i+1}."""
    m = data.draw(st.integers(2, 6))
    a = data.draw(staircases(m=m))
    b = data.draw(staircases(m=m))
    common = [i for i in descents(a) if has_descent(b, i) and b[i + 1] <= a[i + 1]]
    assume(common)
    for i in common:
        assert staircase_meet(perturb(a, i, "star"), b) == staircase_meet(a, b)


@given(st.data())
def test_plus_minus_averaging(data):
    m = data.draw(st.integers(2, 6))
    a = data.draw(staircases(m=m))
    b = data.draw(staircases(m=m))
    idx = [i for i in descents(a) if not has_descent(b, i)]
    assume(idx)
    for i in idx:
        lhs = product_expect([perturb(a, i, "plus"), b]) + product_expect([perturb(a, i, "minus"), b])
        assert lhs == 2 * product_expect([a, b])


class TestDiscretize:
    def test_antidiagonal(self):
        # only D[1,1] has its top-right corner (1/2, 1/2) on or below x + y = 1
        assert discretize_monotone(lambda x, y: x + y <= 1, 2) == S(1, 0)

    def test_trivial_sets(self):
        assert discretize_monotone(lambda x, y: True, 3) == S(3, 3, 3)
        assert discretize_monotone(lambda x, y: False, 3) == S(0, 0, 0)

    def test_non_monotone_rejected(self):
        with pytest.raises(LatticeError):
            discretize_monotone(lambda x, y: x >= Fraction(1, 2), 4)

    @pytest.mark.parametrize(
        "pred, area",
        [
            (lambda x, y: x + y <= 1, Fraction(1, 2)),
            (lambda x, y: 2 * x + y <= 1, Fraction(1, 4)),
            (lambda x, y: x + y <= Fraction(3, 2), Fraction(7, 8)),
            (lambda x, y: x <= Fraction(1, 3) or y <= Fraction(1, 2), Fraction(2, 3)),
        ],
    )
    @pytest.mark.parametrize("m", [1, 2, 3, 5, 8, 13, 20])
    def test_inner_approximation_error(self, pred, area, m):
        err = area - staircase_expect(discretize_monotone(pred, m))
        assert 0 <= err <= Fraction(2, m)


class TestRefine:
    def test_examples(self):
        assert refine(S(2, 1), 1) == S(2, 1)
        assert refine(S(2, 1), 2) == S(4, 4, 2, 2)
        assert staircase_expect(refine(S(2, 1), 2)) == Fraction(3, 4)

    @given(staircases(max_m=4), st.integers(1, 4))
    def test_same_set(self, a, t):
        r = refine(a, t)
        assert staircase_expect(r) == staircase_expect(a)
        # a fine cell (p, q) lies in S_a iff its coarse parent does
        for p in range(1, r.m + 1):
            for q in range(1, r.m + 1):
                parent = ((p - 1) // t + 1, (q - 1) // t + 1)
                assert ((p, q) in r.indicator()) == (parent in a.indicator())


def test_enumeration_counts():
    for m in range(1, 6):
        A = all_staircases(m)
        assert len(A) == count_staircases(m) == len(set(A))
    assert count_staircases(2) == 6 and count_staircases(3) == 20


def test_random_staircase_uniform():
    rng = random.Random(5)
    counts = {}
    for _ in range(6000):
        a = random_staircase(2, rng)
        counts[a] = counts.get(a, 0) + 1
    assert set(counts) == set(all_staircases(2))
    # 1000 expected per element; 5 sigma is about 150
    assert all(abs(c - 1000) < 150 for c in counts.values())


class TestGridIndicator:
    def test_row_major_json(self):
        ind = GridIndicator.from_staircase(S(2, 1))
        assert ind.to_json() == {"m": 2, "cells": [[1, 1], [1, 2], [2, 1]]}
        assert GridIndicator.from_json(ind.to_json()) == ind

    def test_staircase_membership(self):
        a = S(3, 1, 0)
        ind = a.indicator()
        for i in range(1, 4):
            for j in range(1, 4):
                assert ((i, j) in ind) == (j <= a[i])
        assert ind.to_staircase() == a

    def test_cell_out_of_range(self):
        with pytest.raises(LatticeError):
            GridIndicator.from_cells(2, [(3, 1)])

    def test_non_staircase(self):
        with pytest.raises(LatticeError):
            GridIndicator.from_cells(2, [(1, 2)]).to_staircase()

    def test_subsets(self):
        free = S(1, 0).indicator().complement()
        subs = list(subsets_of(free))
        assert len(subs) == 8 and len(set(subs)) == 8
        assert all((s & S(1, 0).indicator()).count() == 0 for s in subs)


class TestGridFunction:
    def test_negative_rejected(self):
        with pytest.raises(LatticeError, match="negative"):
            GridFunction.from_rows([[1, -1], [0, 0]])

    def test_monotone_flag_checked(self):
        with pytest.raises(LatticeError):
            GridFunction.from_rows([[0, 1], [0, 0]], monotone=True)
        GridFunction.from_rows([[2, 1], [1, 0]], monotone=True)

    def test_json_round_trip(self):
        f = GridFunction.from_rows([[Fraction(1, 2), 0], [Fraction(1, 3), 0]])
        assert GridFunction.from_json(json.loads(json.dumps(f.to_json()))) == f

    def test_layer_cake_reconstructs(self):
        rng = random.Random(2)
        for _ in range(20):
            f = random_monotone_function(4, rng)
            parts = layer_cake(f)
            total = GridFunction.constant(4, 0)
            for w, ind in parts:
                total = total + GridFunction.from_indicator(ind).scale(w)
                ind.to_staircase()  # every level set of a monotone f is a staircase
            assert total.values == f.values


class TestRectangles:
    def test_examples(self):
        fam = RectangleFamily.of([[Fraction(1, 2)]])
        assert rect_product_expect(fam, [1]) == Fraction(1, 2)
        fam = RectangleFamily.of([[Fraction(1, 2), 1], [1, Fraction(1, 3)]])
        assert rect_product_expect(fam, [1, 2]) == Fraction(1, 6)

    def test_unit_rectangle_is_identity(self):
        fam = RectangleFamily.of([[Fraction(1, 2), Fraction(3, 4)], [1, 1], [Fraction(1, 5), 1]])
        assert rect_product_expect(fam, [1, 2, 3]) == rect_product_expect(fam, [1, 3])

    def test_errors(self):
        fam = RectangleFamily.of([[Fraction(1, 2)]])
        with pytest.raises(LatticeError):
            rect_product_expect(fam, [2])
        with pytest.raises(LatticeError):
            rect_product_expect(fam, [])
        with pytest.raises(LatticeError):
            RectangleFamily.of([[Fraction(3, 2)]])

    @given(st.lists(st.lists(st.fractions(0, 1), min_size=2, max_size=2), min_size=2, max_size=5), st.data())
    def test_monotone_in_subset(self, rects, data):
        fam = RectangleFamily.of(rects)
        B = data.draw(st.sets(st.integers(1, fam.n), min_size=1))
        extra = data.draw(st.integers(1, fam.n))
        assert rect_product_expect(fam, B | {extra}) <= rect_product_expect(fam, B)

    def test_json(self):
        fam = RectangleFamily.of([[Fraction(1, 2), 1]])
        assert fam.to_json() == {"k": 2, "rects": [["1/2", "1/1"]]}
        assert RectangleFamily.from_json(fam.to_json()) == fam


def test_validity_closure():
    rng = random.Random(0)
    for _ in range(200):
        m = rng.randint(2, 6)
        a, b = random_staircase(m, rng), random_staircase(m, rng)
        staircase_meet(a, b)
        refine(a, rng.randint(1, 3))
        for i in descents(a):
            for kind in ("minus", "plus", "star"):
                perturb(a, i, kind)  # construction validates


def test_codec():
    assert codec.fmt(Fraction(6, 8)) == "3/4"
    assert codec.fmt(0) == "0/1"
    assert codec.fmt(Fraction(-1, 2)) == "-1/2"
    assert codec.parse("3/4") == Fraction(3, 4)
    assert codec.parse(2) == 2
    with pytest.raises(ValueError):
        codec.parse(0.5)
    with pytest.raises(ValueError):
        codec.parse("0.5")
    assert constant(3, 2).is_constant
