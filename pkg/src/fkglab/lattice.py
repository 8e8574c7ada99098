"""Discretized monotone functions on the unit square, and k-rectangles.

The unit square is cut into ``m*m`` cells ``D[i, j]`` (``1 <= i, j <= m``),
where ``D[i, j]`` has top-right corner ``(i/m, j/m)``.  A staircase
sequence ``a`` with ``m >= a_1 >= ... >= a_m >= 0`` encodes the monotone
(decreasing) set made of the cells with ``j <= a_i``: column ``i`` is filled
up to height ``a_i``.

Cell ``(i, j)`` occupies bit ``(i-1)*m + (j-1)`` of a :class:`GridIndicator`,
i.e. row-major order over ``(i, j)``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, combinations_with_replacement
from math import comb
from typing import Callable, Iterable, Iterator, Sequence

from fkglab import codec

PERTURBATIONS = ("minus", "plus", "star")


class LatticeError(ValueError):
    """Invalid staircase, grid or rectangle data."""


@dataclass(frozen=True)
class StaircaseSeq:
    """A weakly decreasing integer sequence in ``A(m)``."""

    m: int
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        m, values = self.m, self.values
        if not isinstance(m, int) or m < 1:
            raise LatticeError(f"resolution m must be a positive integer, got {m!r}")
        if len(values) != m:
            raise LatticeError(f"expected {m} entries, got {len(values)}")
        for idx, v in enumerate(values, start=1):
            if not isinstance(v, int) or isinstance(v, bool):
                raise LatticeError(f"entry at index {idx} is not an integer: {v!r}")
            if not 0 <= v <= m:
                raise LatticeError(f"entry out of range [0, {m}] at index {idx}: {v}")
        for idx in range(1, m):
            if values[idx - 1] < values[idx]:
                raise LatticeError(f"not weakly decreasing at index {idx}")

    def __getitem__(self, i: int) -> int:
        """1-based access, matching ``a_i``."""
        if not 1 <= i <= self.m:
            raise IndexError(i)
        return self.values[i - 1]

    def __iter__(self) -> Iterator[int]:
        return iter(self.values)

    def __len__(self) -> int:
        return self.m

    @property
    def is_constant(self) -> bool:
        return self.values[0] == self.values[-1]

    def indicator(self) -> GridIndicator:
        return GridIndicator.from_staircase(self)

    def to_json(self) -> dict:
        return {"m": self.m, "a": list(self.values)}

    @classmethod
    def from_json(cls, obj: dict) -> StaircaseSeq:
        return staircase_new(obj["m"], obj["a"])


def staircase_new(m: int, values: Iterable[int]) -> StaircaseSeq:
    return StaircaseSeq(m, tuple(values))


def full(m: int) -> StaircaseSeq:
    return StaircaseSeq(m, (m,) * m)


def constant(m: int, h: int) -> StaircaseSeq:
    return StaircaseSeq(m, (h,) * m)


def all_staircases(m: int) -> list[StaircaseSeq]:
    """Every element of ``A(m)``, ``C(2m, m)`` of them, in lexicographic order."""
    out = [
        StaircaseSeq(m, tuple(reversed(c)))
        for c in combinations_with_replacement(range(m + 1), m)
    ]
    out.sort(key=lambda a: a.values)
    return out


def count_staircases(m: int) -> int:
    return comb(2 * m, m)


def random_staircase(m: int, rng: random.Random) -> StaircaseSeq:
    """Uniform sample from ``A(m)``.

    ``A(m)`` is in bijection with lattice paths of ``m`` column steps and
    ``m`` down steps starting at height ``m``; the height when the i-th
    column step is taken is ``a_i``.  Choosing the column-step positions
    uniformly among ``C(2m, m)`` subsets gives a uniform sequence.
    """
    cols = sorted(rng.sample(range(2 * m), m))
    # steps before the i-th column step that were down steps: cols[i] - i
    return StaircaseSeq(m, tuple(m - (pos - i) for i, pos in enumerate(cols)))


def _check_same_m(m1: int, m2: int) -> None:
    if m1 != m2:
        raise LatticeError(f"mismatched resolution: m={m1} vs m={m2}")


def staircase_meet(a: StaircaseSeq, b: StaircaseSeq) -> StaircaseSeq:
    """Componentwise minimum; the set-level intersection ``S_a & S_b``."""
    _check_same_m(a.m, b.m)
    return StaircaseSeq(a.m, tuple(min(x, y) for x, y in zip(a.values, b.values)))


def staircase_expect(a: StaircaseSeq) -> Fraction:
    return Fraction(sum(a.values), a.m * a.m)


def descents(a: StaircaseSeq) -> list[int]:
    return [i for i in range(1, a.m) if a.values[i - 1] > a.values[i]]


def has_descent(a: StaircaseSeq, i: int) -> bool:
    return 1 <= i < a.m and a.values[i - 1] > a.values[i]


def perturb(a: StaircaseSeq, i: int, kind: str) -> StaircaseSeq:
    """Apply one of the three descent perturbations at ``i`` (1-based).

    ``minus`` lowers ``a_i`` to ``a_{i+1}``, ``plus`` raises ``a_{i+1}`` to
    ``a_i``, ``star`` raises ``a_{i+1}`` by one.  Exactly one entry changes.
    """
    if kind not in PERTURBATIONS:
        raise LatticeError(f"unknown perturbation {kind!r}; expected one of {PERTURBATIONS}")
    if not has_descent(a, i):
        raise LatticeError(f"no descent at {i}")
    vals = list(a.values)
    if kind == "minus":
        vals[i - 1] = vals[i]
    elif kind == "plus":
        vals[i] = vals[i - 1]
    else:
        vals[i] += 1
    return StaircaseSeq(a.m, tuple(vals))


def discretize_monotone(pred: Callable[[Fraction, Fraction], bool], m: int) -> StaircaseSeq:
    """Inner approximation of a monotone lower set by grid cells.

    Cell ``D[i, j]`` is kept iff its top-right corner ``(i/m, j/m)``
    satisfies ``pred``.  For a monotone ``pred`` the kept cells form a
    staircase; otherwise :class:`LatticeError` is raised.
    """
    heights = []
    for i in range(1, m + 1):
        x = Fraction(i, m)
        inside = [bool(pred(x, Fraction(j, m))) for j in range(1, m + 1)]
        h = sum(inside)
        if any(inside[h:]) or not all(inside[:h]):
            raise LatticeError(f"predicate is not monotone in column {i}")
        heights.append(h)
    return staircase_new(m, heights)


def refine(a: StaircaseSeq, t: int) -> StaircaseSeq:
    """The same set ``S_a`` described at resolution ``t*m``."""
    if t < 1:
        raise LatticeError(f"refinement factor must be >= 1, got {t}")
    return StaircaseSeq(a.m * t, tuple(t * v for v in a.values for _ in range(t)))


@dataclass(frozen=True)
class GridIndicator:
    """Indicator of an arbitrary union of cells, stored as a bitset."""

    m: int
    bits: int

    def __post_init__(self) -> None:
        if self.m < 1:
            raise LatticeError(f"resolution m must be positive, got {self.m}")
        if self.bits < 0 or self.bits >> (self.m * self.m):
            raise LatticeError("cell bitset has bits outside the m*m grid")

    @classmethod
    def from_cells(cls, m: int, cells: Iterable[Sequence[int]]) -> GridIndicator:
        bits = 0
        for cell in cells:
            i, j = cell
            if not (1 <= i <= m and 1 <= j <= m):
                raise LatticeError(f"cell {(i, j)} out of range for m={m}")
            bits |= 1 << ((i - 1) * m + (j - 1))
        return cls(m, bits)

    @classmethod
    def from_staircase(cls, a: StaircaseSeq) -> GridIndicator:
        m = a.m
        bits = 0
        for i, h in enumerate(a.values):
            bits |= ((1 << h) - 1) << (i * m)
        return cls(m, bits)

    @classmethod
    def empty(cls, m: int) -> GridIndicator:
        return cls(m, 0)

    @property
    def cells(self) -> list[tuple[int, int]]:
        m = self.m
        return [(p // m + 1, p % m + 1) for p in range(m * m) if self.bits >> p & 1]

    def __contains__(self, cell: tuple[int, int]) -> bool:
        i, j = cell
        return 1 <= i <= self.m and 1 <= j <= self.m and bool(self.bits >> ((i - 1) * self.m + j - 1) & 1)

    def __and__(self, other: GridIndicator) -> GridIndicator:
        _check_same_m(self.m, other.m)
        return GridIndicator(self.m, self.bits & other.bits)

    def __or__(self, other: GridIndicator) -> GridIndicator:
        _check_same_m(self.m, other.m)
        return GridIndicator(self.m, self.bits | other.bits)

    def complement(self) -> GridIndicator:
        return GridIndicator(self.m, ((1 << self.m * self.m) - 1) ^ self.bits)

    def count(self) -> int:
        return bin(self.bits).count("1")

    def expect(self) -> Fraction:
        return Fraction(self.count(), self.m * self.m)

    def to_staircase(self) -> StaircaseSeq:
        """Recover the staircase sequence; fails if the set is not monotone."""
        m = self.m
        col_mask = (1 << m) - 1
        heights = []
        for i in range(m):
            col = (self.bits >> (i * m)) & col_mask
            h = col.bit_length()
            if col != (1 << h) - 1:
                raise LatticeError(f"column {i + 1} is not an initial segment")
            heights.append(h)
        return staircase_new(m, heights)

    def to_json(self) -> dict:
        return {"m": self.m, "cells": [list(c) for c in self.cells]}

    @classmethod
    def from_json(cls, obj: dict) -> GridIndicator:
        return cls.from_cells(obj["m"], obj["cells"])


def as_indicator(f: StaircaseSeq | GridIndicator) -> GridIndicator:
    if isinstance(f, GridIndicator):
        return f
    if isinstance(f, StaircaseSeq):
        return GridIndicator.from_staircase(f)
    raise TypeError(f"expected StaircaseSeq or GridIndicator, got {type(f).__name__}")


def subsets_of(ind: GridIndicator) -> Iterator[GridIndicator]:
    """All ``2**count`` sub-indicators, in increasing bit order."""
    positions = [p for p in range(ind.m * ind.m) if ind.bits >> p & 1]
    for r in range(len(positions) + 1):
        for combo in combinations(positions, r):
            bits = 0
            for p in combo:
                bits |= 1 << p
            yield GridIndicator(ind.m, bits)


def product_expect(fs: Sequence[StaircaseSeq | GridIndicator]) -> Fraction:
    """Measure of the intersection of the cell sets, ``|cap cells| / m**2``."""
    if not fs:
        raise LatticeError("product_expect needs at least one function")
    m = fs[0].m
    bits = -1
    for f in fs:
        _check_same_m(m, f.m)
        bits &= as_indicator(f).bits
    return Fraction(bin(bits).count("1"), m * m)


@dataclass(frozen=True)
class GridFunction:
    """A nonnegative cell-constant function; ``values[i-1][j-1]`` is its value on ``D[i, j]``."""

    m: int
    values: tuple[tuple[Fraction, ...], ...]
    monotone: bool = False

    def __post_init__(self) -> None:
        m = self.m
        if m < 1 or len(self.values) != m or any(len(row) != m for row in self.values):
            raise LatticeError(f"grid function must be an {m}x{m} matrix")
        for i, row in enumerate(self.values, start=1):
            for j, v in enumerate(row, start=1):
                if v < 0:
                    raise LatticeError(f"negative value {v} at cell ({i}, {j})")
        if self.monotone and not self.is_monotone():
            raise LatticeError("monotone flag set but values increase along an axis")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], monotone: bool = False) -> GridFunction:
        vals = tuple(tuple(Fraction(v) for v in row) for row in rows)
        return cls(len(vals), vals, monotone)

    @classmethod
    def from_indicator(cls, f: StaircaseSeq | GridIndicator) -> GridFunction:
        ind = as_indicator(f)
        m = ind.m
        vals = tuple(
            tuple(Fraction(ind.bits >> (i * m + j) & 1) for j in range(m)) for i in range(m)
        )
        return cls(m, vals, isinstance(f, StaircaseSeq))

    @classmethod
    def constant(cls, m: int, c) -> GridFunction:
        c = Fraction(c)
        return cls(m, tuple((c,) * m for _ in range(m)), True)

    def is_monotone(self) -> bool:
        v, m = self.values, self.m
        for i in range(m):
            for j in range(m):
                if i + 1 < m and v[i][j] < v[i + 1][j]:
                    return False
                if j + 1 < m and v[i][j] < v[i][j + 1]:
                    return False
        return True

    def cell_values(self) -> list[Fraction]:
        """Values in row-major ``(i, j)`` order."""
        return [x for row in self.values for x in row]

    def expect(self) -> Fraction:
        return sum(self.cell_values(), Fraction(0)) / (self.m * self.m)

    def __add__(self, other: GridFunction) -> GridFunction:
        _check_same_m(self.m, other.m)
        vals = tuple(
            tuple(x + y for x, y in zip(r1, r2)) for r1, r2 in zip(self.values, other.values)
        )
        return GridFunction(self.m, vals, self.monotone and other.monotone)

    def __mul__(self, other: GridFunction) -> GridFunction:
        _check_same_m(self.m, other.m)
        vals = tuple(
            tuple(x * y for x, y in zip(r1, r2)) for r1, r2 in zip(self.values, other.values)
        )
        return GridFunction(self.m, vals, self.monotone and other.monotone)

    def scale(self, c) -> GridFunction:
        c = Fraction(c)
        if c < 0:
            raise LatticeError("scaling by a negative factor leaves the nonnegative cone")
        return GridFunction(self.m, tuple(tuple(c * x for x in row) for row in self.values), self.monotone)

    def to_json(self) -> dict:
        return {"m": self.m, "values": [[codec.fmt(x) for x in row] for row in self.values]}

    @classmethod
    def from_json(cls, obj: dict) -> GridFunction:
        rows = obj["values"]
        return cls.from_rows([[codec.parse(x) for x in row] for row in rows], bool(obj.get("monotone", False)))


def layer_cake(f: GridFunction) -> list[tuple[Fraction, GridIndicator]]:
    """Write ``f`` as ``sum(w * chi_L)`` over its upper level sets ``L = {f >= v}``.

    With distinct positive values ``v_1 < ... < v_r`` the weights are
    ``v_k - v_{k-1}`` (``v_0 = 0``).  For monotone ``f`` every level set is a
    staircase, which is what lets positivity questions reduce to indicators.
    """
    m = f.m
    levels = sorted({x for x in f.cell_values() if x > 0})
    out = []
    prev = Fraction(0)
    flat = f.cell_values()
    for v in levels:
        bits = 0
        for p, x in enumerate(flat):
            if x >= v:
                bits |= 1 << p
        out.append((v - prev, GridIndicator(m, bits)))
        prev = v
    return out


def random_monotone_function(m: int, rng: random.Random, layers: int = 3, max_weight: int = 5) -> GridFunction:
    """Sum of a few random staircase indicators with random positive weights."""
    f = GridFunction.constant(m, 0)
    for _ in range(layers):
        w = Fraction(rng.randint(1, max_weight), rng.randint(1, max_weight))
        f = f + GridFunction.from_indicator(random_staircase(m, rng)).scale(w)
    return f


@dataclass(frozen=True)
class RectangleFamily:
    """Down-rectangles ``[0, r_1] x ... x [0, r_k]`` given by corner vectors."""

    k: int
    rects: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        if self.k < 1:
            raise LatticeError(f"dimension k must be positive, got {self.k}")
        for idx, r in enumerate(self.rects, start=1):
            if len(r) != self.k:
                raise LatticeError(f"rectangle {idx} has {len(r)} coordinates, expected {self.k}")
            for x in r:
                if not 0 <= x <= 1:
                    raise LatticeError(f"rectangle {idx} coordinate {x} outside [0, 1]")

    @classmethod
    def of(cls, rects: Sequence[Sequence]) -> RectangleFamily:
        rs = tuple(tuple(Fraction(x) for x in r) for r in rects)
        if not rs:
            raise LatticeError("empty rectangle family")
        return cls(len(rs[0]), rs)

    @property
    def n(self) -> int:
        return len(self.rects)

    def to_json(self) -> dict:
        return {"k": self.k, "rects": [[codec.fmt(x) for x in r] for r in self.rects]}

    @classmethod
    def from_json(cls, obj: dict) -> RectangleFamily:
        rs = tuple(tuple(codec.parse(x) for x in r) for r in obj["rects"])
        return cls(int(obj["k"]), rs)


def rect_product_expect(fam: RectangleFamily, B: Iterable[int]) -> Fraction:
    """Volume of the intersection of the rectangles indexed (1-based) by ``B``."""
    idx = list(B)
    if not idx:
        raise LatticeError("index subset must be nonempty")
    for i in idx:
        if not 1 <= i <= fam.n:
            raise LatticeError(f"rectangle index {i} out of range 1..{fam.n}")
    vol = Fraction(1)
    for axis in range(fam.k):
        vol *= min(fam.rects[i - 1][axis] for i in idx)
    return vol


def random_rectangles(k: int, n: int, rng: random.Random, denominator: int = 12) -> RectangleFamily:
    rects = tuple(
        tuple(Fraction(rng.randint(0, denominator), denominator) for _ in range(k)) for _ in range(n)
    )
    return RectangleFamily(k, rects)
