"""Expectation oracles: exact ``E(f^{i_1} ... f^{i_p})`` for index subsets.

Subsets of ``{1..n}`` are encoded as ``n``-bit masks, function ``i`` at bit
``i-1``.  Each oracle memoizes its moments in a flat list of ``2**n``
slots.  A slot is written at most once with a deterministic value, so
concurrent readers never observe anything but ``None`` or the final value.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from fkglab.lattice import (
    GridFunction,
    GridIndicator,
    LatticeError,
    RectangleFamily,
    StaircaseSeq,
    as_indicator,
)


def mask_of(B: Iterable[int]) -> int:
    mask = 0
    for i in B:
        mask |= 1 << (i - 1)
    return mask


def indices_of(mask: int) -> list[int]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


class ExpectationOracle:
    """Base class.  Subclasses implement :meth:`_compute` for nonzero masks."""

    n: int

    def __init__(self, n: int) -> None:
        if n < 1:
            raise ValueError(f"an oracle needs at least one function, got n={n}")
        self.n = n
        self._memo: list[Fraction | None] = [None] * (1 << n)

    def _compute(self, mask: int) -> Fraction:
        raise NotImplementedError

    def moment_mask(self, mask: int) -> Fraction:
        if not 0 < mask < (1 << self.n):
            raise ValueError(f"subset mask {mask:#b} is empty or out of range for n={self.n}")
        v = self._memo[mask]
        if v is None:
            v = self._compute(mask)
            self._memo[mask] = v
        return v

    def moment(self, B: Iterable[int]) -> Fraction:
        """``E(prod_{i in B} f^i)`` for a nonempty set of 1-based indices."""
        idx = list(B)
        for i in idx:
            if not 1 <= i <= self.n:
                raise ValueError(f"index {i} out of range 1..{self.n}")
        return self.moment_mask(mask_of(idx))

    def warm(self) -> list[Fraction]:
        """Fill the whole memo table; returns it with slot 0 set to 1."""
        for mask in range(1, 1 << self.n):
            self.moment_mask(mask)
        table = list(self._memo)
        table[0] = Fraction(1)
        return table  # type: ignore[return-value]

    def restrict(self, indices: Sequence[int]) -> ExpectationOracle:
        return SubOracle(self, indices)

    def with_unit(self) -> ExpectationOracle:
        return UnitExtendedOracle(self)

    def permuted(self, perm: Sequence[int]) -> ExpectationOracle:
        """Oracle whose function ``i`` is this oracle's function ``perm[i-1]``."""
        return SubOracle(self, perm)


class TableOracle(ExpectationOracle):
    """Moments given explicitly, keyed by index tuples or masks."""

    def __init__(self, n: int, moments: Mapping) -> None:
        super().__init__(n)
        self._table: dict[int, Fraction] = {}
        for key, val in moments.items():
            mask = key if isinstance(key, int) else mask_of(key)
            self._table[mask] = Fraction(val)

    def _compute(self, mask: int) -> Fraction:
        try:
            return self._table[mask]
        except KeyError:
            raise KeyError(f"no moment given for subset {indices_of(mask)}") from None


class StaircaseOracle(ExpectationOracle):
    """Products of staircase indicators: ``sum_i min_{k in B} a^k_i / m**2``."""

    def __init__(self, seqs: Sequence[StaircaseSeq]) -> None:
        super().__init__(len(seqs))
        m = seqs[0].m
        for a in seqs:
            if a.m != m:
                raise LatticeError(f"mismatched resolution: m={m} vs m={a.m}")
        self.m = m
        self.seqs = tuple(seqs)
        self._cols = [a.values for a in seqs]

    def _compute(self, mask: int) -> Fraction:
        rows = [self._cols[i - 1] for i in indices_of(mask)]
        return Fraction(sum(map(min, zip(*rows))), self.m * self.m)


class IndicatorOracle(ExpectationOracle):
    """Products of arbitrary cell-set indicators (staircases are converted)."""

    def __init__(self, fs: Sequence[StaircaseSeq | GridIndicator]) -> None:
        super().__init__(len(fs))
        inds = [as_indicator(f) for f in fs]
        m = inds[0].m
        for f in inds:
            if f.m != m:
                raise LatticeError(f"mismatched resolution: m={m} vs m={f.m}")
        self.m = m
        self.indicators = tuple(inds)

    def _compute(self, mask: int) -> Fraction:
        bits = -1
        for i in indices_of(mask):
            bits &= self.indicators[i - 1].bits
        return Fraction(bin(bits).count("1"), self.m * self.m)


class GridFunctionOracle(ExpectationOracle):
    """Products of cell-constant functions: ``(1/m**2) sum_cells prod_i f^i``."""

    def __init__(self, fs: Sequence[GridFunction]) -> None:
        super().__init__(len(fs))
        m = fs[0].m
        for f in fs:
            if f.m != m:
                raise LatticeError(f"mismatched resolution: m={m} vs m={f.m}")
        self.m = m
        self.functions = tuple(fs)
        self._flat = [f.cell_values() for f in fs]

    def _compute(self, mask: int) -> Fraction:
        idx = indices_of(mask)
        total = Fraction(0)
        for cell in range(self.m * self.m):
            p = Fraction(1)
            for i in idx:
                p *= self._flat[i - 1][cell]
                if not p:
                    break
            total += p
        return total / (self.m * self.m)


class RectangleOracle(ExpectationOracle):
    """Intersection volumes of down-rectangles."""

    def __init__(self, fam: RectangleFamily) -> None:
        super().__init__(fam.n)
        self.family = fam

    def _compute(self, mask: int) -> Fraction:
        vol = Fraction(1)
        rects = [self.family.rects[i - 1] for i in indices_of(mask)]
        for axis in range(self.family.k):
            vol *= min(r[axis] for r in rects)
        return vol


class SubOracle(ExpectationOracle):
    """Re-indexed view: function ``i`` here is ``base`` function ``indices[i-1]``.

    Indices must be distinct: a mask cannot express ``f*f``.
    """

    def __init__(self, base: ExpectationOracle, indices: Sequence[int]) -> None:
        super().__init__(len(indices))
        for i in indices:
            if not 1 <= i <= base.n:
                raise ValueError(f"index {i} out of range 1..{base.n}")
        if len(set(indices)) != len(indices):
            raise ValueError(f"repeated index in {list(indices)}")
        self.base = base
        self.indices = tuple(indices)

    def _compute(self, mask: int) -> Fraction:
        base_mask = 0
        for i in indices_of(mask):
            base_mask |= 1 << (self.indices[i - 1] - 1)
        return self.base.moment_mask(base_mask)


class UnitExtendedOracle(ExpectationOracle):
    """``base`` plus one extra function, the constant 1, at index ``n+1``."""

    def __init__(self, base: ExpectationOracle) -> None:
        super().__init__(base.n + 1)
        self.base = base

    def _compute(self, mask: int) -> Fraction:
        base_mask = mask & ((1 << self.base.n) - 1)
        if base_mask == 0:
            return Fraction(1)
        return self.base.moment_mask(base_mask)


def oracle_for(fs: Sequence) -> ExpectationOracle:
    """Pick the tightest oracle for a homogeneous list of functions."""
    if isinstance(fs, RectangleFamily):
        return RectangleOracle(fs)
    if not fs:
        raise ValueError("need at least one function")
    if all(isinstance(f, StaircaseSeq) for f in fs):
        return StaircaseOracle(fs)
    if all(isinstance(f, (StaircaseSeq, GridIndicator)) for f in fs):
        return IndicatorOracle(fs)
    funcs = [f if isinstance(f, GridFunction) else GridFunction.from_indicator(f) for f in fs]
    return GridFunctionOracle(funcs)
