import json
from fractions import Fraction
from itertools import product

import pytest

from fkglab import verify
from fkglab.engine import CapExceeded, en_partition
from fkglab.lattice import all_staircases, has_descent, perturb, staircase_new
from fkglab.oracles import StaircaseOracle
from fkglab.verify import (
    BudgetExceeded,
    argmin_structure,
    check_proposition,
    exhaustive_scan,
    random_scan,
    rectangle_scan,
    to_csv,
)

from conftest import brute_en, cell_set


def S(*vals):
    return staircase_new(len(vals), vals)


class TestExhaustive:
    def test_m2_n3_against_brute(self):
        r = exhaustive_scan(2, 3)
        A = all_staircases(2)
        sets = {a: cell_set(a) for a in A}
        brute_min = min(brute_en(2, [sets[a] for a in t]) for t in product(A, repeat=3))
        assert r.min_value == brute_min == 0
        assert r.tuple_count == 216 and r.evaluated == 56
        assert r.violations == []

    def test_kappa3(self):
        r = exhaustive_scan(2, 3, target="kappa3")
        assert r.min_value == Fraction(-3, 32)
        assert r.argmin == [(S(2, 1),) * 3]
        assert len(r.violations) > 0
        assert all(v < 0 for _, v in r.violations)

    def test_argmin_sorted(self):
        r = exhaustive_scan(2, 3)
        keys = [tuple(x for a in t for x in a.values) for t in r.argmin]
        assert keys == sorted(keys)

    def test_refusals(self):
        with pytest.raises(BudgetExceeded):
            exhaustive_scan(3, 3, budget=100)
        assert issubclass(BudgetExceeded, CapExceeded)
        with pytest.raises(ValueError):
            exhaustive_scan(2, 4, target="kappa3")
        with pytest.raises(ValueError):
            exhaustive_scan(2, 3, target="nope")

    def test_workers_do_not_change_report(self):
        a = exhaustive_scan(2, 4, workers=1).to_json()
        b = exhaustive_scan(2, 4, workers=2).to_json()
        assert json.dumps(a) == json.dumps(b)


class TestRandom:
    def test_reproducible(self):
        a = random_scan(4, 4, 30, seed=9)
        b = random_scan(4, 4, 30, seed=9)
        assert a.to_json() == b.to_json()
        assert a.violations == [] and a.min_value >= 0

    def test_seed_recorded(self):
        j = random_scan(3, 3, 5, seed=1).to_json()
        assert j["seed"] == 1 and j["prng"] == verify.PRNG

    def test_trials_guard(self):
        with pytest.raises(ValueError):
            random_scan(3, 3, 0, seed=1)


class TestRectangles:
    def test_k3(self):
        r = rectangle_scan(3, 4, 40, seed=2)
        assert r.violations == [] and r.min_value >= 0

    def test_k1_closed_form(self):
        r = rectangle_scan(1, 5, 50, seed=3)
        assert r.extra == {"closed_form_mismatches": 0}
        assert r.to_json()["closed_form_mismatches"] == 0

    def test_trials_guard(self):
        with pytest.raises(ValueError):
            rectangle_scan(2, 3, 0, seed=1)


def test_argmin_structure():
    r = argmin_structure(2, 3)
    assert r.all_constant
    assert r.min_value == 0
    assert all(a.is_constant for t in r.extremal for a in t)
    assert r.to_json()["all_constant"] is True


class TestPropositions:
    @pytest.mark.parametrize(
        "prop, m, n",
        [
            ("averaging", 2, 3),
            ("star", 2, 3),
            ("B_n", 2, 3),
            ("meet-star", 2, 2),
            ("apmb", 2, 2),
            ("A_n", 2, 3),
            ("branching", 3, 4),
        ],
    )
    def test_zero_failures(self, prop, m, n):
        r = check_proposition(prop, m, n)
        assert r.ok and r.instances_checked > 0

    def test_a_n_instance_count(self):
        # for each b: 2^(free cells) sets, times one a per multiset of n-2 from A(2)
        A = all_staircases(2)
        per_a = sum(2 ** (4 - sum(b.values)) for b in A)
        assert check_proposition("A_n", 2, 3).instances_checked == len(A) * per_a

    def test_unknown(self):
        with pytest.raises(ValueError):
            check_proposition("nope", 2, 3)
        with pytest.raises(ValueError):
            check_proposition("star", 2, 1)

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            check_proposition("A_n", 3, 5)
        with pytest.raises(BudgetExceeded):
            check_proposition("branching", 2, 3, trials=10, budget=5)

    def test_json_and_csv(self):
        r = check_proposition("apmb", 2, 2)
        j = r.to_json()
        assert j["prop"] == "apmb" and j["failures"] == []
        assert to_csv(r.csv_rows()) == "prop,instance,lhs,rhs\n"


@pytest.mark.parametrize("m", [2, 3])
def test_star_first_slot_form(m):
    """n=3 with the starred sequence first: E_3(a*, b, c) <= E_3(a, b, c) for every c."""
    A = all_staircases(m)
    e3 = lambda fs: en_partition(StaircaseOracle(fs)).value
    checked = 0
    for i in range(1, m):
        for a in A:
            for b in A:
                if not (has_descent(a, i) and has_descent(b, i) and b[i + 1] <= a[i + 1]):
                    continue
                star = perturb(a, i, "star")
                for c in A:
                    assert e3([star, b, c]) <= e3([a, b, c])
                    checked += 1
    assert checked == check_proposition("star", m, 3).instances_checked
