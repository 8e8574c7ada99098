"""Integer partitions, power-sum moments and truncated formal power series.

Two series types:

* :class:`TruncatedSeries` -- rational coefficients ``c_0 .. c_D``.
* :class:`GridSeries` -- one rational series per grid cell (cell-major), the
  representation of ``F(x, t) = 1 - f_1(x) t - f_2(x) t**2 - ...`` for
  cell-constant ``f_i``.  ``log`` acts cell by cell and :meth:`GridSeries.expect`
  averages the cells into a rational series.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import factorial, prod
from typing import Iterator, Mapping, Sequence

from fkglab import codec
from fkglab.engine import CapExceeded
from fkglab.lattice import GridFunction, GridIndicator, LatticeError, StaircaseSeq

PARTITION_CAP = 30
PRIMES_CAP = 8
EXTRACT_CAP = 3
EXTRACT_HARD_CAP = 4


class SeriesError(ValueError):
    """Precondition failure on a series (wrong constant term, mixed degrees...)."""


@dataclass(frozen=True)
class IntPartition:
    parts: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.parts or any(p <= 0 for p in self.parts):
            raise ValueError(f"parts must be positive: {self.parts}")
        if any(self.parts[i] < self.parts[i + 1] for i in range(len(self.parts) - 1)):
            raise ValueError(f"parts must be weakly decreasing: {self.parts}")

    @property
    def n(self) -> int:
        return sum(self.parts)

    @property
    def length(self) -> int:
        return len(self.parts)

    def multiplicities(self) -> dict[int, int]:
        return dict(Counter(self.parts))


def partitions_of(n: int, cap: int = PARTITION_CAP) -> Iterator[IntPartition]:
    """Partitions of ``n`` in reverse lexicographic order: (n), (n-1, 1), ..., (1, ..., 1)."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if n > cap:
        raise CapExceeded(f"partitions of n={n} exceed cap {cap}")

    def rec(rest: int, largest: int) -> Iterator[tuple[int, ...]]:
        if rest == 0:
            yield ()
            return
        for first in range(min(rest, largest), 0, -1):
            for tail in rec(rest - first, first):
                yield (first,) + tail

    for parts in rec(n, n):
        yield IntPartition(parts)


def z_lambda(lam: IntPartition) -> int:
    """``prod_i i**m_i * m_i!``; ``n!/z`` is the size of the conjugacy class."""
    z = 1
    for i, mi in lam.multiplicities().items():
        z *= i**mi * factorial(mi)
    if factorial(lam.n) % z:
        raise ArithmeticError(f"z_lambda={z} does not divide {lam.n}!")
    return z


def _as_function(f) -> GridFunction:
    if isinstance(f, GridFunction):
        return f
    if isinstance(f, (StaircaseSeq, GridIndicator)):
        return GridFunction.from_indicator(f)
    raise TypeError(f"expected a grid function or indicator, got {type(f).__name__}")


def moment(f, d: int) -> Fraction:
    """Power-sum moment ``p_d(f) = E(f**d)``."""
    if d < 1:
        raise ValueError(f"moment order must be >= 1, got {d}")
    f = _as_function(f)
    return sum((x**d for x in f.cell_values()), Fraction(0)) / (f.m * f.m)


def en_equal(f, n: int) -> Fraction:
    """``E_n(f, ..., f)`` from the cycle-type expansion over partitions of ``n``."""
    f = _as_function(f)
    p = {d: moment(f, d) for d in range(1, n + 1)}
    total = Fraction(0)
    for lam in partitions_of(n):
        term = Fraction(prod(p[x] for x in lam.parts), z_lambda(lam))
        total += term if lam.length % 2 == 1 else -term
    return factorial(n) * total


@dataclass(frozen=True)
class TruncatedSeries:
    """``c_0 + c_1 t + ... + c_D t**D``, exact; nothing beyond degree ``D`` is known."""

    coeffs: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if not self.coeffs:
            raise SeriesError("a truncated series needs at least the constant term")

    @classmethod
    def of(cls, coeffs: Sequence, degree: int | None = None) -> TruncatedSeries:
        cs = [Fraction(c) for c in coeffs]
        if degree is not None:
            cs = (cs + [Fraction(0)] * (degree + 1))[: degree + 1]
        return cls(tuple(cs))

    @classmethod
    def zero(cls, degree: int) -> TruncatedSeries:
        return cls((Fraction(0),) * (degree + 1))

    @classmethod
    def one(cls, degree: int) -> TruncatedSeries:
        return cls.of([1], degree)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, k: int) -> Fraction:
        return self.coeffs[k]

    def _same_degree(self, other: TruncatedSeries) -> None:
        if self.degree != other.degree:
            raise SeriesError(f"degree mismatch: {self.degree} vs {other.degree}")

    def __add__(self, other: TruncatedSeries) -> TruncatedSeries:
        self._same_degree(other)
        return TruncatedSeries(tuple(x + y for x, y in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: TruncatedSeries) -> TruncatedSeries:
        self._same_degree(other)
        return TruncatedSeries(tuple(x - y for x, y in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> TruncatedSeries:
        return TruncatedSeries(tuple(-x for x in self.coeffs))

    def __mul__(self, other: TruncatedSeries) -> TruncatedSeries:
        self._same_degree(other)
        a, b = self.coeffs, other.coeffs
        D = self.degree
        out = [Fraction(0)] * (D + 1)
        for i, x in enumerate(a):
            if x:
                for j in range(D + 1 - i):
                    out[i + j] += x * b[j]
        return TruncatedSeries(tuple(out))

    def scale(self, c) -> TruncatedSeries:
        c = Fraction(c)
        return TruncatedSeries(tuple(c * x for x in self.coeffs))

    def log(self) -> TruncatedSeries:
        """``L`` with ``F' = F L'``: ``k L_k = k F_k - sum_{j<k} j L_j F_{k-j}``."""
        F = self.coeffs
        if F[0] != 1:
            raise SeriesError(f"log needs constant term 1, got {F[0]}")
        L = [Fraction(0)] * len(F)
        for k in range(1, len(F)):
            acc = k * F[k]
            for j in range(1, k):
                if L[j] and F[k - j]:
                    acc -= j * L[j] * F[k - j]
            L[k] = acc / k
        return TruncatedSeries(tuple(L))

    def exp(self) -> TruncatedSeries:
        """``E`` with ``E' = Z' E``: ``k E_k = sum_{j<=k} j Z_j E_{k-j}``."""
        Z = self.coeffs
        if Z[0] != 0:
            raise SeriesError(f"exp needs constant term 0, got {Z[0]}")
        E = [Fraction(0)] * len(Z)
        E[0] = Fraction(1)
        for k in range(1, len(Z)):
            acc = Fraction(0)
            for j in range(1, k + 1):
                if Z[j] and E[k - j]:
                    acc += j * Z[j] * E[k - j]
            E[k] = acc / k
        return TruncatedSeries(tuple(E))

    def to_json(self) -> dict:
        return {"degree": self.degree, "coeffs": [codec.fmt(c) for c in self.coeffs]}


@dataclass(frozen=True)
class GridSeries:
    """A series whose coefficients are cell-constant functions, stored per cell.

    ``cells[p]`` is the rational series at cell ``p`` (row-major ``(i, j)``).
    Coefficients may be negative here (``log`` produces them), so this is
    not a sequence of :class:`GridFunction`.
    """

    m: int
    cells: tuple[TruncatedSeries, ...]

    def __post_init__(self) -> None:
        if len(self.cells) != self.m * self.m:
            raise SeriesError(f"expected {self.m * self.m} cell series, got {len(self.cells)}")
        if len({c.degree for c in self.cells}) > 1:
            raise SeriesError("cell series of different degrees")

    @property
    def degree(self) -> int:
        return self.cells[0].degree

    @classmethod
    def one_minus(cls, terms: Mapping[int, object], degree: int) -> GridSeries:
        """``1 - sum_e f_e t**e`` for a mapping exponent -> function; terms past ``degree`` drop."""
        if not terms:
            raise SeriesError("need at least one term")
        fs = {e: _as_function(f) for e, f in terms.items()}
        m = next(iter(fs.values())).m
        cols = [[Fraction(0)] * (m * m) for _ in range(degree + 1)]
        cols[0] = [Fraction(1)] * (m * m)
        for e, g in fs.items():
            if e < 1:
                raise SeriesError(f"exponent {e} must be >= 1")
            if g.m != m:
                raise LatticeError(f"mismatched resolution: m={m} vs m={g.m}")
            if e <= degree:
                cols[e] = [c - x for c, x in zip(cols[e], g.cell_values())]
        cells = tuple(TruncatedSeries(tuple(col[p] for col in cols)) for p in range(m * m))
        return cls(m, cells)

    def coefficient(self, k: int) -> list[Fraction]:
        """Cell values of ``[t**k]`` in row-major order."""
        return [c[k] for c in self.cells]

    def map_cells(self, fn) -> GridSeries:
        # identical cell series give identical results; evaluate each once
        cache: dict[TruncatedSeries, TruncatedSeries] = {}
        out = []
        for c in self.cells:
            if c not in cache:
                cache[c] = fn(c)
            out.append(cache[c])
        return GridSeries(self.m, tuple(out))

    def log(self) -> GridSeries:
        return self.map_cells(TruncatedSeries.log)

    def exp(self) -> GridSeries:
        return self.map_cells(TruncatedSeries.exp)

    def expect(self) -> TruncatedSeries:
        """Cell average, coefficient by coefficient."""
        D = self.degree
        counts = Counter(self.cells)
        total = [Fraction(0)] * (D + 1)
        for series, mult in counts.items():
            for k, x in enumerate(series.coeffs):
                if x:
                    total[k] += mult * x
        N = self.m * self.m
        return TruncatedSeries(tuple(x / N for x in total))


def series_log(F: TruncatedSeries | GridSeries) -> TruncatedSeries | GridSeries:
    return F.log()


def series_exp(Z: TruncatedSeries | GridSeries) -> TruncatedSeries | GridSeries:
    return Z.exp()


def geometric_mean(F: GridSeries) -> TruncatedSeries:
    """``G(F) = exp(E(log F))`` as a rational series."""
    return F.log().expect().exp()


def geometric_mean_coeffs(F: GridSeries, degree: int | None = None) -> list[Fraction]:
    """``c_1 .. c_D`` in ``G(F) = 1 - c_1 t - c_2 t**2 - ...``.

    ``F`` must be ``1 - sum f_i t**i`` with every ``f_i >= 0``.
    """
    D = F.degree if degree is None else degree
    if D > F.degree:
        raise SeriesError(f"requested degree {D} exceeds series degree {F.degree}")
    for p, c in enumerate(F.cells):
        if c[0] != 1:
            raise SeriesError(f"constant term must be 1, got {c[0]} at cell {p}")
        for k in range(1, D + 1):
            if c[k] > 0:
                raise SeriesError(
                    f"coefficient of t^{k} must be -f_{k} with f_{k} >= 0; cell {p} has f_{k} = {-c[k]}"
                )
    if D < F.degree:
        F = GridSeries(F.m, tuple(TruncatedSeries(c.coeffs[: D + 1]) for c in F.cells))
    G = geometric_mean(F)
    return [-G[k] for k in range(1, D + 1)]


def first_primes(n: int) -> list[int]:
    out: list[int] = []
    k = 2
    while len(out) < n:
        if all(k % p for p in out if p * p <= k):
            out.append(k)
        k += 1
    return out


def _count_solutions(ks: Sequence[int], N: int) -> int:
    """Number of ``s >= 0`` with ``sum s_j k_j = N``, by brute force."""
    ranges = [range(N // k + 1) for k in ks]
    return sum(1 for s in product(*ranges) if sum(a * b for a, b in zip(s, ks)) == N)


def primes_encoding(n: int, cap: int = PRIMES_CAP) -> tuple[list[int], int]:
    """Exponents ``k_j = (p_1...p_n)/p_j`` and target degree ``N = sum k_j``.

    The only nonnegative solution of ``sum s_j k_j = N`` is all ones; this is
    checked by enumeration for ``n <= 4``.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if n > cap:
        raise CapExceeded(f"primes encoding for n={n} exceeds cap {cap}")
    ps = first_primes(n)
    k = prod(ps)
    ks = [k // p for p in ps]
    N = sum(ks)
    if n <= 4:
        sols = _count_solutions(ks, N)
        if sols != 1:
            raise ArithmeticError(f"expected a unique solution, found {sols}")
    return ks, N


def encoded_series(fs: Sequence, ks: Sequence[int], N: int) -> GridSeries:
    return GridSeries.one_minus({k: f for k, f in zip(ks, fs)}, N)


def extract_en_via_series(fs: Sequence, max_n: int = EXTRACT_CAP) -> Fraction:
    """Recover ``E_n(f_1, ..., f_n)`` as ``[t**N]`` of ``1 - exp(E(log(1 - sum f_j t**k_j)))``."""
    n = len(fs)
    if max_n > EXTRACT_HARD_CAP:
        raise CapExceeded(f"series extraction is limited to n <= {EXTRACT_HARD_CAP}")
    if n > max_n:
        raise CapExceeded(f"series extraction for n={n} exceeds cap {max_n}")
    ks, N = primes_encoding(n)
    F = encoded_series([_as_function(f) for f in fs], ks, N)
    return -geometric_mean(F)[N]
