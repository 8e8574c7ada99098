"""The functionals E_n, computed three ways over an :class:`ExpectationOracle`.

``E_n = sum over sigma in S_n of (-1)**(cycles(sigma) - 1) * E_sigma`` where
``E_sigma`` multiplies the oracle moments of the cycle supports.

* ``naive`` walks all ``n!`` permutations literally.
* ``partition`` groups permutations by their set partition of cycle
  supports; a block of size ``p`` stands for ``(p-1)!`` cyclic orders, so
  ``E_n = sum_pi (-1)**(|pi|-1) prod_{B in pi} (|B|-1)! E(f^B)``, a sum of
  ``Bell(n)`` terms.
* ``recursive`` peels off the last function: merge it into each earlier
  block, or split it off as its own factor with a minus sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from math import factorial
from typing import Iterator, Sequence

from fkglab import codec
from fkglab.oracles import ExpectationOracle, mask_of

NAIVE_CAP = 9
PARTITION_CAP = 14
BACKENDS = ("naive", "partition", "recursive")


class CapExceeded(ValueError):
    """A size cap or work budget would be exceeded; nothing was computed."""


def bell(n: int) -> int:
    """Bell numbers via the Bell triangle."""
    if n < 0:
        raise ValueError(n)
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


@dataclass(frozen=True)
class CycleDecomposition:
    """A permutation of ``{1..n}`` as disjoint cycles.

    Each cycle starts at its smallest element and lists ``i, sigma(i),
    sigma(sigma(i)), ...``; cycles are ordered by their smallest element.
    """

    n: int
    cycles: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        seen = sorted(i for c in self.cycles for i in c)
        if seen != list(range(1, self.n + 1)) or any(not c for c in self.cycles):
            raise ValueError(f"cycles {self.cycles} do not partition 1..{self.n}")

    @property
    def cycle_count(self) -> int:
        return len(self.cycles)

    @property
    def sign(self) -> int:
        """``(-1)**(cycle_count - 1)``, the weight of this term in E_n."""
        return -1 if self.cycle_count % 2 == 0 else 1

    @property
    def cycle_type(self) -> tuple[int, ...]:
        return tuple(sorted((len(c) for c in self.cycles), reverse=True))

    @classmethod
    def from_images(cls, images: Sequence[int]) -> CycleDecomposition:
        """From one-line notation ``(sigma(1), ..., sigma(n))`` (1-based)."""
        n = len(images)
        seen = [False] * (n + 1)
        cycles = []
        for start in range(1, n + 1):
            if seen[start]:
                continue
            cyc = []
            j = start
            while not seen[j]:
                seen[j] = True
                cyc.append(j)
                j = images[j - 1]
            cycles.append(tuple(cyc))
        return cls(n, tuple(cycles))


def _check_cap(n: int, cap: int, what: str) -> None:
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if n > cap:
        raise CapExceeded(f"{what}: n={n} exceeds cap {cap}")


def permutations_by_cycles(n: int, cap: int = NAIVE_CAP) -> Iterator[CycleDecomposition]:
    """All ``n!`` permutations, in lexicographic order of one-line notation."""
    _check_cap(n, cap, "permutation enumeration")
    for images in permutations(range(1, n + 1)):
        yield CycleDecomposition.from_images(images)


@dataclass(frozen=True)
class SetPartition:
    n: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        seen = sorted(i for b in self.blocks for i in b)
        if seen != list(range(1, self.n + 1)) or any(not b for b in self.blocks):
            raise ValueError(f"blocks {self.blocks} do not partition 1..{self.n}")
        if list(self.blocks) != sorted(self.blocks, key=min):
            raise ValueError("blocks must be ordered by smallest element")


def restricted_growth_strings(n: int) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings of length ``n`` in lexicographic order."""
    rgs = [0] * n

    def rec(pos: int, nblocks: int) -> Iterator[tuple[int, ...]]:
        if pos == n:
            yield tuple(rgs)
            return
        for v in range(nblocks + 1):
            rgs[pos] = v
            yield from rec(pos + 1, max(nblocks, v + 1))

    if n == 0:
        yield ()
        return
    yield from rec(1, 1)


def set_partitions(n: int, cap: int = PARTITION_CAP) -> Iterator[SetPartition]:
    """Every set partition of ``{1..n}`` once, in restricted-growth-string order."""
    _check_cap(n, cap, "set partition enumeration")
    for rgs in restricted_growth_strings(n):
        blocks: list[list[int]] = []
        for i, b in enumerate(rgs, start=1):
            if b == len(blocks):
                blocks.append([i])
            else:
                blocks[b].append(i)
        yield SetPartition(n, tuple(tuple(b) for b in blocks))


def e_sigma(oracle: ExpectationOracle, sigma: CycleDecomposition) -> Fraction:
    """Product over cycles of the moment of the cycle's support."""
    if sigma.n != oracle.n:
        raise ValueError(f"permutation of {sigma.n} points vs oracle with n={oracle.n}")
    out = Fraction(1)
    for c in sigma.cycles:
        out *= oracle.moment_mask(mask_of(c))
    return out


@dataclass(frozen=True)
class EnResult:
    value: Fraction
    backend: str
    terms: int

    def to_json(self) -> dict:
        return {"value": codec.fmt(self.value), "backend": self.backend, "terms": self.terms}


def _cycle_support_masks(images: tuple[int, ...], n: int) -> list[int]:
    # images are 0-based
    seen = 0
    masks = []
    for s in range(n):
        if seen >> s & 1:
            continue
        mask = 0
        j = s
        while not mask >> j & 1:
            mask |= 1 << j
            j = images[j]
        seen |= mask
        masks.append(mask)
    return masks


def en_naive(oracle: ExpectationOracle, cap: int = NAIVE_CAP) -> EnResult:
    """Literal signed sum over the symmetric group; the trusted reference."""
    n = oracle.n
    _check_cap(n, cap, "naive backend")
    table = oracle.warm()
    pos = Fraction(0)
    neg = Fraction(0)
    count = 0
    for images in permutations(range(n)):
        masks = _cycle_support_masks(images, n)
        term = table[masks[0]]
        for mk in masks[1:]:
            term *= table[mk]
        if len(masks) % 2:
            pos += term
        else:
            neg += term
        count += 1
    return EnResult(pos - neg, "naive", count)


def en_partition(oracle: ExpectationOracle, cap: int = PARTITION_CAP) -> EnResult:
    """Sum over set partitions of the cycle supports (``Bell(n)`` terms).

    Partitions are generated by choosing the block that contains the lowest
    remaining index, so each partition is one root-to-leaf path and common
    prefixes share their partial products.
    """
    n = oracle.n
    _check_cap(n, cap, "partition backend")
    table = oracle.warm()
    # Folding the sign into the blocks: (-1)**(k-1) prod w = -prod(-w).
    weight: list[Fraction] = [Fraction(0)] * (1 << n)
    for mask in range(1, 1 << n):
        weight[mask] = -factorial(bin(mask).count("1") - 1) * table[mask]
    leaves = 0

    def rec(rest: int) -> Fraction:
        nonlocal leaves
        if rest == 0:
            leaves += 1
            return Fraction(1)
        low = rest & -rest
        others = rest ^ low
        total = Fraction(0)
        sub = others
        while True:
            block = low | sub
            w = weight[block]
            tail = rec(rest ^ block)
            if w:
                total += w * tail
            if sub == 0:
                break
            sub = (sub - 1) & others
        return total

    value = -rec((1 << n) - 1)
    return EnResult(value, "partition", leaves)


def en_recursive(oracle: ExpectationOracle) -> EnResult:
    """Recursion on the last function: ``E_n = e_1 + ... + e_{n-1} - e_n``.

    A state is a tuple of disjoint index blocks standing for the products of
    the functions in each block; ``e_i`` merges the last block into block
    ``i`` and ``e_n`` splits it off as ``E_{k-1} * E(last)``.
    """
    nodes = 0
    moment = oracle.moment_mask

    def rec(blocks: tuple[int, ...]) -> Fraction:
        nonlocal nodes
        nodes += 1
        if len(blocks) == 1:
            return moment(blocks[0])
        head, last = blocks[:-1], blocks[-1]
        total = Fraction(0)
        for j in range(len(head)):
            total += rec(head[:j] + (head[j] | last,) + head[j + 1 :])
        total -= rec(head) * moment(last)
        return total

    value = rec(tuple(1 << i for i in range(oracle.n)))
    return EnResult(value, "recursive", nodes)


def en(oracle: ExpectationOracle, backend: str = "partition") -> EnResult:
    if backend == "naive":
        return en_naive(oracle)
    if backend == "partition":
        return en_partition(oracle)
    if backend == "recursive":
        return en_recursive(oracle)
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


def en_value(oracle: ExpectationOracle) -> Fraction:
    return en_partition(oracle).value


def partial_cycle_sum(oracle: ExpectationOracle, c: Sequence[int]) -> Fraction:
    """Signed sum of ``E_sigma`` over the permutations containing the cycle ``c``."""
    n = oracle.n
    if not c or len(set(c)) != len(c) or any(not 1 <= i <= n for i in c):
        raise ValueError(f"invalid cycle {tuple(c)} for n={n}")
    if len(c) == n:
        return oracle.moment_mask((1 << n) - 1)
    rest = [j for j in range(1, n + 1) if j not in set(c)]
    return -oracle.moment(c) * en_partition(oracle.restrict(rest)).value


def cycles_through(n: int, i: int) -> Iterator[tuple[int, ...]]:
    """Every cycle (as a cyclic order starting at ``i``) whose support contains ``i``."""
    others = [j for j in range(1, n + 1) if j != i]
    for r in range(len(others) + 1):
        for perm in permutations(others, r):
            yield (i,) + perm


def kappa3(oracle: ExpectationOracle) -> Fraction:
    """Third joint cumulant, E(fgh) + 2E(f)E(g)E(h) - E(f)E(gh) - E(g)E(fh) - E(h)E(fg)."""
    if oracle.n != 3:
        raise ValueError(f"kappa3 needs exactly 3 functions, got {oracle.n}")
    M = oracle.moment
    f, g, h = M([1]), M([2]), M([3])
    return M([1, 2, 3]) + 2 * f * g * h - f * M([2, 3]) - g * M([1, 3]) - h * M([1, 2])


def e3_formula(oracle: ExpectationOracle) -> Fraction:
    """The five-term expression 2E(fgh) + E(f)E(g)E(h) - E(f)E(gh) - E(g)E(fh) - E(h)E(fg)."""
    if oracle.n != 3:
        raise ValueError(f"E_3 needs exactly 3 functions, got {oracle.n}")
    M = oracle.moment
    f, g, h = M([1]), M([2]), M([3])
    return 2 * M([1, 2, 3]) + f * g * h - f * M([2, 3]) - g * M([1, 3]) - h * M([1, 2])


def en_constant_closed_form(alphas: Sequence) -> Fraction:
    """``alpha_1 (1 - alpha_2) (2 - alpha_3) ... (n-1 - alpha_n)`` for sorted alphas in [0, 1]."""
    xs = [Fraction(a) for a in alphas]
    if not xs:
        raise ValueError("need at least one value")
    for x in xs:
        if not 0 <= x <= 1:
            raise ValueError(f"value {x} outside [0, 1]")
    for j in range(1, len(xs)):
        if xs[j - 1] > xs[j]:
            raise ValueError(f"values not weakly increasing at position {j}")
    out = xs[0]
    for j in range(1, len(xs)):
        out *= j - xs[j]
    return out


def en_with_unit(oracle: ExpectationOracle, backend: str = "partition") -> Fraction:
    """``E_n(f^1, ..., f^{n-1}, 1)``, cross-checked against ``(n-2) E_{n-1}``."""
    lhs = en(oracle.with_unit(), backend).value
    rhs = (oracle.n - 1) * en(oracle, backend).value
    if lhs != rhs:
        raise AssertionError(
            f"branching identity violated: E_{oracle.n + 1}(..., 1) = {lhs} but "
            f"{oracle.n - 1} * E_{oracle.n} = {rhs}"
        )
    return lhs
