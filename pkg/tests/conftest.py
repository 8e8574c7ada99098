import sys
from fractions import Fraction
from itertools import permutations

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from fkglab.lattice import StaircaseSeq

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def staircases(draw, m=None, max_m=5):
    if m is None:
        m = draw(st.integers(1, max_m))
    vals = draw(st.lists(st.integers(0, m), min_size=m, max_size=m))
    return StaircaseSeq(m, tuple(sorted(vals, reverse=True)))


@st.composite
def staircase_tuples(draw, n, max_m=4):
    m = draw(st.integers(1, max_m))
    return [draw(staircases(m=m)) for _ in range(n)]


def cell_set(a):
    """Cells of S_a as a plain set, built without the bitset code."""
    return {(i, j) for i in range(1, a.m + 1) for j in range(1, a.values[i - 1] + 1)}


def brute_en(m, sets):
    """E_n from the signed permutation sum over plain cell sets.

    Deliberately independent of fkglab: its own cycle walk, its own
    intersection-based moments.
    """
    n = len(sets)
    total = Fraction(0)
    for p in permutations(range(n)):
        seen = set()
        term = Fraction(1)
        cycles = 0
        for s in range(n):
            if s in seen:
                continue
            cyc = []
            j = s
            while j not in seen:
                seen.add(j)
                cyc.append(j)
                j = p[j]
            inter = set.intersection(*[sets[k] for k in cyc])
            term *= Fraction(len(inter), m * m)
            cycles += 1
        total += term if cycles % 2 else -term
    return total


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.format_line(num))
