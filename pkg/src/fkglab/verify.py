"""Exhaustive and randomized checks of E_n positivity and its supporting identities.

Scans enumerate sorted tuples only (E_n is symmetric) and merge per-chunk
results with an order-independent reduction, so a report depends on the
inputs and seed but never on the worker count.
"""

from __future__ import annotations

import csv
import io
import logging
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement, islice
from math import comb
from typing import Callable, Iterable, Sequence

from fkglab import codec
from fkglab.engine import CapExceeded, en_constant_closed_form, en_partition, en_with_unit, kappa3
from fkglab.lattice import (
    GridIndicator,
    RectangleFamily,
    StaircaseSeq,
    all_staircases,
    has_descent,
    perturb,
    product_expect,
    random_rectangles,
    random_staircase,
    staircase_expect,
    staircase_meet,
    subsets_of,
)
from fkglab.oracles import IndicatorOracle, RectangleOracle, StaircaseOracle

log = logging.getLogger(__name__)

SCHEMA = "fkg-lab/report-v1"
PRNG = "python-random-MT19937"
DEFAULT_BUDGET = 200_000
TARGETS = ("en", "kappa3")
PROPOSITIONS = ("averaging", "star", "meet-star", "apmb", "A_n", "B_n", "branching")
FULL_SUBSET_LIMIT = 12
CHUNK = 256


class BudgetExceeded(CapExceeded):
    """The requested enumeration is larger than the configured budget."""


def _refuse_over_budget(count: int, budget: int, what: str) -> None:
    if count > budget:
        raise BudgetExceeded(f"{what} needs {count} evaluations, budget is {budget}")


# -- report types ---------------------------------------------------------


def _seq_json(t: Sequence) -> list:
    if t and isinstance(t[0], StaircaseSeq):
        return [list(a.values) for a in t]
    # rectangle corners
    return [[codec.fmt(x) for x in r] for r in t]


def _canon_key(t: Sequence) -> tuple:
    if t and isinstance(t[0], StaircaseSeq):
        return tuple(x for a in t for x in a.values)
    return tuple(x for r in t for x in r)


@dataclass
class ScanReport:
    mode: str
    target: str
    n: int
    tuple_count: int
    evaluated: int
    min_value: Fraction
    argmin: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    m: int | None = None
    k: int | None = None
    seed: int | None = None
    extra: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        """Deterministic content only; ``elapsed`` is deliberately left out."""
        out = {
            "kind": "scan",
            "mode": self.mode,
            "target": self.target,
            "m": self.m,
            "k": self.k,
            "n": self.n,
            "seed": self.seed,
            "prng": PRNG if self.seed is not None else None,
            "tuple_count": self.tuple_count,
            "evaluated": self.evaluated,
            "min_value": codec.fmt(self.min_value),
            "argmin": [_seq_json(t) for t in self.argmin],
            "violations": [{"tuple": _seq_json(t), "value": codec.fmt(v)} for t, v in self.violations],
        }
        out.update(self.extra)
        return out

    def csv_rows(self) -> list[list[str]]:
        rows = [["row", "value", "tuple"]]
        for t in self.argmin:
            rows.append(["argmin", codec.fmt(self.min_value), repr(_seq_json(t))])
        for t, v in self.violations:
            rows.append(["violation", codec.fmt(v), repr(_seq_json(t))])
        return rows


@dataclass
class PropCheckReport:
    prop_id: str
    m: int
    n: int
    instances_checked: int
    failures: list = field(default_factory=list)
    seed: int | None = None

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {
            "kind": "proposition",
            "prop": self.prop_id,
            "m": self.m,
            "n": self.n,
            "seed": self.seed,
            "instances_checked": self.instances_checked,
            "failures": self.failures,
        }

    def csv_rows(self) -> list[list[str]]:
        rows = [["prop", "instance", "lhs", "rhs"]]
        for f in self.failures:
            rows.append([self.prop_id, repr(f["instance"]), f["lhs"], f["rhs"]])
        return rows


@dataclass
class ArgminReport:
    m: int
    n: int
    min_value: Fraction
    minimizer_count: int
    max_lambda: Fraction
    extremal: list
    all_constant: bool

    def to_json(self) -> dict:
        return {
            "kind": "argmin",
            "m": self.m,
            "n": self.n,
            "min_value": codec.fmt(self.min_value),
            "minimizer_count": self.minimizer_count,
            "max_lambda": codec.fmt(self.max_lambda),
            "extremal": [_seq_json(t) for t in self.extremal],
            "all_constant": self.all_constant,
        }


def to_csv(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


# -- scan machinery -------------------------------------------------------


def _evaluate(target: str, t: Sequence) -> Fraction:
    if isinstance(t[0], StaircaseSeq):
        oracle = StaircaseOracle(t)
    else:
        oracle = RectangleOracle(RectangleFamily(len(t[0]), tuple(t)))
    if target == "kappa3":
        return kappa3(oracle)
    return en_partition(oracle).value


@dataclass
class _Partial:
    min_value: Fraction | None = None
    argmin: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    evaluated: int = 0

    def add(self, t: tuple, v: Fraction) -> None:
        self.evaluated += 1
        if self.min_value is None or v < self.min_value:
            self.min_value = v
            self.argmin = [t]
        elif v == self.min_value:
            self.argmin.append(t)
        if v < 0:
            self.violations.append((t, v))

    def merge(self, other: _Partial) -> None:
        self.evaluated += other.evaluated
        self.violations.extend(other.violations)
        if other.min_value is None:
            return
        if self.min_value is None or other.min_value < self.min_value:
            self.min_value = other.min_value
            self.argmin = list(other.argmin)
        elif other.min_value == self.min_value:
            self.argmin.extend(other.argmin)


def _reduce(parts: Iterable[_Partial]) -> _Partial:
    total = _Partial()
    for p in parts:
        total.merge(p)
    uniq = {_canon_key(t): t for t in total.argmin}
    total.argmin = [uniq[k] for k in sorted(uniq)]
    total.violations.sort(key=lambda tv: (tv[1], _canon_key(tv[0])))
    return total


def _map(fn: Callable, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _exhaustive_chunk(job: tuple) -> _Partial:
    m, n, target, start, stop = job
    A = all_staircases(m)
    part = _Partial()
    for idx in islice(combinations_with_replacement(range(len(A)), n), start, stop):
        t = tuple(A[i] for i in idx)
        part.add(t, _evaluate(target, t))
    return part


def _tuple_chunk(job: tuple) -> _Partial:
    target, tuples = job
    part = _Partial()
    for t in tuples:
        part.add(t, _evaluate(target, t))
    return part


def _chunks(total: int, size: int = CHUNK) -> list[tuple[int, int]]:
    return [(s, min(s + size, total)) for s in range(0, total, size)]


def exhaustive_scan(
    m: int, n: int, target: str = "en", budget: int = DEFAULT_BUDGET, workers: int = 1
) -> ScanReport:
    """Evaluate every multiset of ``n`` sequences from ``A(m)``."""
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")
    if target == "kappa3" and n != 3:
        raise ValueError("kappa3 scans need n=3")
    size = comb(2 * m, m)
    multisets = comb(size + n - 1, n)
    _refuse_over_budget(multisets, budget, f"exhaustive scan m={m} n={n}")
    t0 = time.perf_counter()
    jobs = [(m, n, target, s, e) for s, e in _chunks(multisets)]
    res = _reduce(_map(_exhaustive_chunk, jobs, workers))
    elapsed = time.perf_counter() - t0
    log.info("exhaustive scan m=%d n=%d target=%s: %d multisets in %.2fs", m, n, target, multisets, elapsed)
    return ScanReport(
        mode="exhaustive",
        target=target,
        m=m,
        n=n,
        tuple_count=size**n,
        evaluated=res.evaluated,
        min_value=res.min_value,
        argmin=res.argmin,
        violations=res.violations,
        elapsed=elapsed,
    )


def random_scan(m: int, n: int, trials: int, seed: int, workers: int = 1, target: str = "en") -> ScanReport:
    """Uniform random tuples from ``A(m)``, reproducible from ``seed``."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = random.Random(seed)
    samples = [
        tuple(sorted((random_staircase(m, rng) for _ in range(n)), key=lambda a: a.values))
        for _ in range(trials)
    ]
    t0 = time.perf_counter()
    jobs = [(target, samples[s:e]) for s, e in _chunks(trials)]
    res = _reduce(_map(_tuple_chunk, jobs, workers))
    elapsed = time.perf_counter() - t0
    return ScanReport(
        mode="random",
        target=target,
        m=m,
        n=n,
        seed=seed,
        tuple_count=trials,
        evaluated=res.evaluated,
        min_value=res.min_value,
        argmin=res.argmin,
        violations=res.violations,
        elapsed=elapsed,
    )


def rectangle_scan(k: int, n: int, trials: int, seed: int, workers: int = 1, denominator: int = 12) -> ScanReport:
    """Random down-rectangles with corners in ``{0, 1/q, ..., 1}``.

    For ``k = 1`` each family is also compared with the interval closed form
    and the mismatch count is reported as ``closed_form_mismatches``.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = random.Random(seed)
    samples = [tuple(sorted(random_rectangles(k, n, rng, denominator).rects)) for _ in range(trials)]
    t0 = time.perf_counter()
    jobs = [("en", samples[s:e]) for s, e in _chunks(trials)]
    res = _reduce(_map(_tuple_chunk, jobs, workers))
    extra = {}
    if k == 1:
        bad = 0
        for t in samples:
            closed = en_constant_closed_form(sorted(r[0] for r in t))
            if closed != _evaluate("en", t):
                bad += 1
        extra["closed_form_mismatches"] = bad
    return ScanReport(
        mode="rectangle",
        target="en",
        k=k,
        n=n,
        seed=seed,
        tuple_count=trials,
        evaluated=res.evaluated,
        min_value=res.min_value,
        argmin=res.argmin,
        violations=res.violations,
        extra=extra,
        elapsed=time.perf_counter() - t0,
    )


def argmin_structure(m: int, n: int, budget: int = DEFAULT_BUDGET) -> ArgminReport:
    """Among E_n-minimizing tuples, keep those maximizing ``sum E(a^i)``; are they all constant?"""
    A = all_staircases(m)
    _refuse_over_budget(comb(len(A) + n - 1, n), budget, f"argmin structure m={m} n={n}")
    best: Fraction | None = None
    minimizers: list[tuple[tuple, Fraction]] = []
    for t in combinations_with_replacement(A, n):
        v = en_partition(StaircaseOracle(t)).value
        lam = sum((staircase_expect(a) for a in t), Fraction(0))
        if best is None or v < best:
            best, minimizers = v, [(t, lam)]
        elif v == best:
            minimizers.append((t, lam))
    top = max(lam for _, lam in minimizers)
    extremal = sorted((t for t, lam in minimizers if lam == top), key=_canon_key)
    return ArgminReport(
        m=m,
        n=n,
        min_value=best,
        minimizer_count=len(minimizers),
        max_lambda=top,
        extremal=extremal,
        all_constant=all(a.is_constant for t in extremal for a in t),
    )


# -- proposition checks ---------------------------------------------------


def _en(fs: Sequence) -> Fraction:
    if all(isinstance(f, StaircaseSeq) for f in fs):
        return en_partition(StaircaseOracle(fs)).value
    return en_partition(IndicatorOracle(fs)).value


def _failure(instance: dict, lhs: Fraction, rhs: Fraction) -> dict:
    return {"instance": instance, "lhs": codec.fmt(lhs), "rhs": codec.fmt(rhs)}


def _seqs(fs: Sequence[StaircaseSeq]) -> list:
    return [list(a.values) for a in fs]


def _count_averaging(A: list, m: int, n: int) -> int:
    total = 0
    for i in range(1, m):
        d = sum(1 for a in A if has_descent(a, i))
        total += comb(len(A) - d + n - 2, n - 1) * d
    return total


def _check_averaging(A: list, m: int, n: int) -> tuple[int, list]:
    count, failures = 0, []
    for i in range(1, m):
        with_d = [a for a in A if has_descent(a, i)]
        without = [a for a in A if not has_descent(a, i)]
        for rest in combinations_with_replacement(without, n - 1):
            for a in with_d:
                lhs = 2 * _en(rest + (a,))
                rhs = _en(rest + (perturb(a, i, "plus"),)) + _en(rest + (perturb(a, i, "minus"),))
                count += 1
                if lhs != rhs:
                    failures.append(_failure({"i": i, "a": list(a.values), "others": _seqs(rest)}, lhs, rhs))
    return count, failures


def _star_pairs(A: list, m: int) -> list[tuple[int, StaircaseSeq, StaircaseSeq]]:
    """``(i, b, c)`` with a common descent at ``i`` and ``b_{i+1} <= c_{i+1}``."""
    out = []
    for i in range(1, m):
        desc = [a for a in A if has_descent(a, i)]
        for b in desc:
            for c in desc:
                if b[i + 1] <= c[i + 1]:
                    out.append((i, b, c))
    return out


def _check_star(A: list, m: int, n: int) -> tuple[int, list]:
    count, failures = 0, []
    pairs = _star_pairs(A, m)
    for rest in combinations_with_replacement(A, n - 2):
        for i, b, c in pairs:
            lhs = _en(rest + (b, perturb(c, i, "star")))
            rhs = _en(rest + (b, c))
            count += 1
            if lhs > rhs:
                failures.append(
                    _failure({"i": i, "b": list(b.values), "c": list(c.values), "others": _seqs(rest)}, lhs, rhs)
                )
    return count, failures


def _check_meet_star(A: list, m: int) -> tuple[int, list]:
    count, failures = 0, []
    # a is the starred sequence; admissible when b_{i+1} <= a_{i+1}
    for i, b, a in _star_pairs(A, m):
        lhs = staircase_meet(perturb(a, i, "star"), b)
        rhs = staircase_meet(a, b)
        count += 1
        if lhs != rhs:
            failures.append(
                {"instance": {"i": i, "a": list(a.values), "b": list(b.values)},
                 "lhs": list(lhs.values), "rhs": list(rhs.values)}
            )
    return count, failures


def _check_apmb(A: list, m: int) -> tuple[int, list]:
    count, failures = 0, []
    for i in range(1, m):
        for a in (x for x in A if has_descent(x, i)):
            for b in (x for x in A if not has_descent(x, i)):
                lhs = product_expect([perturb(a, i, "plus"), b]) + product_expect([perturb(a, i, "minus"), b])
                rhs = 2 * product_expect([a, b])
                count += 1
                if lhs != rhs:
                    failures.append(_failure({"i": i, "a": list(a.values), "b": list(b.values)}, lhs, rhs))
    return count, failures


def _disjoint_sets(b: StaircaseSeq, rng: random.Random, trials: int) -> list[GridIndicator]:
    free = b.indicator().complement()
    if free.count() <= FULL_SUBSET_LIMIT:
        return list(subsets_of(free))
    cells = [p for p in range(b.m * b.m) if free.bits >> p & 1]
    out = []
    for _ in range(trials):
        bits = 0
        for p in cells:
            if rng.random() < 0.5:
                bits |= 1 << p
        out.append(GridIndicator(b.m, bits))
    return out


def _count_A_n(A: list, m: int, n: int, trials: int) -> int:
    per_b = 0
    for b in A:
        free = m * m - sum(b.values)
        per_b += 2**free if free <= FULL_SUBSET_LIMIT else trials
    return comb(len(A) + n - 3, n - 2) * per_b


def _check_A_n(A: list, m: int, n: int, rng: random.Random, trials: int) -> tuple[int, list]:
    count, failures = 0, []
    sets = {b: _disjoint_sets(b, rng, trials) for b in A}
    for rest in combinations_with_replacement(A, n - 2):
        for b in A:
            for S in sets[b]:
                v = _en(rest + (b, S))
                count += 1
                if v > 0:
                    failures.append(
                        _failure({"b": list(b.values), "S": [list(c) for c in S.cells], "others": _seqs(rest)},
                                 v, Fraction(0))
                    )
    return count, failures


def _check_branching(m: int, n: int, rng: random.Random, trials: int) -> tuple[int, list]:
    count, failures = 0, []
    for _ in range(trials):
        fs = [random_staircase(m, rng) for _ in range(n - 1)]
        count += 1
        try:
            en_with_unit(StaircaseOracle(fs))
        except AssertionError as exc:
            failures.append({"instance": {"functions": _seqs(fs)}, "lhs": str(exc), "rhs": ""})
    return count, failures


def check_proposition(
    prop_id: str,
    m: int,
    n: int,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    trials: int = 200,
) -> PropCheckReport:
    """Check one identity or inequality on every admissible instance at ``(m, n)``.

    ``meet-star`` and ``apmb`` are statements about pairs and ignore ``n``.
    ``branching`` samples ``trials`` random instances; ``A_n`` samples
    ``trials`` sets only when the free region exceeds 12 cells.
    """
    if prop_id not in PROPOSITIONS:
        raise ValueError(f"unknown proposition {prop_id!r}; expected one of {PROPOSITIONS}")
    A = all_staircases(m)
    rng = random.Random(seed)
    uses_seed = prop_id in ("branching", "A_n")
    if prop_id in ("averaging", "star", "B_n", "A_n", "branching") and n < 2:
        raise ValueError(f"{prop_id} needs n >= 2")
    if prop_id == "averaging":
        _refuse_over_budget(_count_averaging(A, m, n), budget, f"averaging m={m} n={n}")
        count, failures = _check_averaging(A, m, n)
    elif prop_id in ("star", "B_n"):
        _refuse_over_budget(
            comb(len(A) + n - 3, n - 2) * len(_star_pairs(A, m)), budget, f"{prop_id} m={m} n={n}"
        )
        count, failures = _check_star(A, m, n)
    elif prop_id == "meet-star":
        count, failures = _check_meet_star(A, m)
    elif prop_id == "apmb":
        count, failures = _check_apmb(A, m)
    elif prop_id == "A_n":
        _refuse_over_budget(_count_A_n(A, m, n, trials), budget, f"A_n m={m} n={n}")
        count, failures = _check_A_n(A, m, n, rng, trials)
    else:
        _refuse_over_budget(trials, budget, f"branching m={m} n={n}")
        count, failures = _check_branching(m, n, rng, trials)
    return PropCheckReport(prop_id, m, n, count, failures, seed if uses_seed else None)
