"""Multi-index sets and sparse grids for the dyadic Faber expansion.

Levels are tuples of ints. A level ``k`` with ``|k|_1 = m - j`` belongs to the
notched set of parameter ``(beta, m)`` when ``|k|_inf >= m - floor(beta * j)``.
The floor is taken in exact rational arithmetic because membership jumps
discontinuously in ``beta``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

Level = tuple[int, ...]

__all__ = [
    "IndexSet",
    "SparseGrid",
    "as_rational",
    "enumerate_notched",
    "enumerate_smolyak",
    "enumerate_full",
    "enumerate_index_set",
    "grid_points",
    "cardinality_D",
    "grid_cardinality",
    "is_downward_closed",
    "cardinality_D_bound",
    "grid_cardinality_bound",
    "exp_sum_check",
]


def as_rational(value) -> Fraction:
    """Exact rational for a user-supplied parameter.

    Floats go through their shortest decimal repr, so ``1.1`` becomes 11/10
    rather than the nearest binary fraction.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"parameter must be finite, got {value}")
        return Fraction(repr(value))
    return Fraction(str(value))


def _compositions(total: int, parts: int) -> Iterator[Level]:
    """All tuples of ``parts`` non-negative ints summing to ``total``, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


@dataclass(frozen=True)
class IndexSet:
    """Ordered, duplicate-free collection of levels.

    ``kind`` is one of ``"notched"``, ``"smolyak"``, ``"full"`` or ``"custom"``;
    ``params`` records the defining parameters for reporting.
    """

    d: int
    entries: tuple[Level, ...]
    kind: str = "custom"
    params: tuple = ()

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        for k in self.entries:
            if len(k) != self.d:
                raise ValueError(f"level {k} does not have length {self.d}")
            if min(k) < -1:
                raise ValueError(f"level entries must be >= -1, got {k}")
        if len(set(self.entries)) != len(self.entries):
            raise ValueError("duplicate levels in index set")

    @classmethod
    def from_levels(cls, levels, d: int | None = None, kind: str = "custom", params=()) -> "IndexSet":
        levels = sorted({tuple(int(v) for v in k) for k in levels})
        if d is None:
            if not levels:
                raise ValueError("cannot infer dimension of an empty index set")
            d = len(levels[0])
        return cls(d, tuple(levels), kind, tuple(params))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, k) -> bool:
        return tuple(k) in self._lookup

    @property
    def _lookup(self) -> frozenset:
        cached = self.__dict__.get("_lookup_cache")
        if cached is None:
            cached = frozenset(self.entries)
            object.__setattr__(self, "_lookup_cache", cached)
        return cached

    def issubset(self, other: "IndexSet") -> bool:
        return self._lookup <= other._lookup

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64).reshape(len(self.entries), self.d)

    def to_text(self) -> str:
        return "".join(" ".join(str(v) for v in k) + "\n" for k in self.entries)


def _check_dm(d: int, m: int) -> None:
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if m < 0:
        raise ValueError(f"level m must be >= 0, got {m}")


def enumerate_notched(d: int, beta, m: int) -> IndexSet:
    """Levels ``k >= 0`` with ``|k|_1 = m - j`` and ``|k|_inf >= m - floor(beta j)``."""
    _check_dm(d, m)
    b = as_rational(beta)
    if b <= 1:
        raise ValueError(f"beta must be > 1, got {beta}")
    levels = []
    for j in range(m + 1):
        threshold = m - math.floor(b * j)
        for k in _compositions(m - j, d):
            if max(k) >= threshold:
                levels.append(k)
    return IndexSet.from_levels(levels, d, "notched", (b, m))


def enumerate_smolyak(d: int, m: int) -> IndexSet:
    """Levels ``k >= 0`` with ``|k|_1 <= m``."""
    _check_dm(d, m)
    levels = [k for total in range(m + 1) for k in _compositions(total, d)]
    return IndexSet.from_levels(levels, d, "smolyak", (m,))


def enumerate_full(d: int, m: int) -> IndexSet:
    """Levels ``k >= 0`` with ``|k|_inf <= m``."""
    _check_dm(d, m)
    levels = itertools.product(range(m + 1), repeat=d)
    return IndexSet.from_levels(levels, d, "full", (m,))


def enumerate_index_set(kind: str, d: int, m: int, beta=None) -> IndexSet:
    if kind == "notched":
        if beta is None:
            raise ValueError("notched index set requires beta")
        return enumerate_notched(d, beta, m)
    if kind == "smolyak":
        return enumerate_smolyak(d, m)
    if kind == "full":
        return enumerate_full(d, m)
    raise ValueError(f"unknown index-set kind {kind!r}")


@dataclass(frozen=True)
class SparseGrid:
    """Deduplicated dyadic points stored exactly.

    Point ``i`` has coordinates ``numerators[i] / 2**level``; ``numerators``
    has shape ``(n, d)`` and the common denominator exponent ``level`` is the
    finest one needed.
    """

    d: int
    level: int
    numerators: np.ndarray

    def __len__(self):
        return self.numerators.shape[0]

    @property
    def points(self) -> np.ndarray:
        return np.ldexp(self.numerators.astype(float), -self.level)

    def reduced(self) -> list[tuple[tuple[int, int], ...]]:
        """Per-coordinate ``(s, k)`` pairs in lowest terms, meaning ``s / 2**k``."""
        out = []
        for row in self.numerators.tolist():
            coords = []
            for num in row:
                k = self.level
                while k > 0 and num % 2 == 0:
                    num //= 2
                    k -= 1
                coords.append((num, k))
            out.append(tuple(coords))
        return out

    def to_text(self) -> str:
        lines = []
        for row in self.reduced():
            lines.append(" ".join(f"{s}/2^{k}" for s, k in row))
        return "".join(line + "\n" for line in lines)


def level_stencil_numerators(k: Sequence[int]) -> list[np.ndarray]:
    """Per-axis stencil numerators over denominator ``2**(k_i+1)``: ``0..2**(k_i+1)``."""
    return [np.arange(2 ** (ki + 1) + 1, dtype=np.int64) for ki in k]


def grid_points(S: IndexSet) -> SparseGrid:
    """Points at which the truncated expansion over ``S`` samples and interpolates.

    Each level ``k`` contributes the tensor grid ``s_i / 2**(k_i+1)`` with
    ``s_i = 0..2**(k_i+1)``, i.e. the union of its second-difference stencils.
    """
    if len(S) == 0:
        raise ValueError("index set must be nonempty")
    if min(min(k) for k in S) < 0:
        raise ValueError("grid points are defined for levels >= 0 only")
    top = max(max(k) for k in S) + 1
    blocks = []
    for k in S:
        axes = []
        for ki in k:
            axes.append(np.arange(2 ** (ki + 1) + 1, dtype=np.int64) << (top - ki - 1))
        mesh = np.meshgrid(*axes, indexing="ij")
        blocks.append(np.stack([a.ravel() for a in mesh], axis=1))
    allpts = np.unique(np.concatenate(blocks, axis=0), axis=0)
    return SparseGrid(S.d, top, allpts)


def cardinality_D(S: IndexSet) -> int:
    """Number of ``(k, s)`` basis terms: ``sum_k 2**|k|_1`` (exact Python int)."""
    total = 0
    for k in S:
        if min(k) < 0:
            raise ValueError("cardinality_D is defined for levels >= 0")
        total += 1 << sum(k)
    return total


def is_downward_closed(S: IndexSet) -> bool:
    for k in S:
        for i, ki in enumerate(k):
            if ki > 0 and (*k[:i], ki - 1, *k[i + 1:]) not in S:
                return False
    return True


def grid_cardinality(S: IndexSet) -> int:
    """``len(grid_points(S))`` without materializing the grid.

    A coordinate of exact dyadic level ``l`` (``0`` for the endpoints) appears
    in the stencils of level ``k`` iff ``l <= k + 1``. For a downward-closed
    ``S`` this gives ``sum_k prod_i c(k_i)`` with ``c(0) = 3`` and ``c(k) = 2^k``.
    """
    if len(S) == 0:
        raise ValueError("index set must be nonempty")
    if not is_downward_closed(S):
        return len(grid_points(S))
    total = 0
    for k in S:
        term = 1
        for ki in k:
            term *= 3 if ki == 0 else 1 << ki
        total += term
    return total


def cardinality_D_bound(d: int, beta, m: int) -> float:
    b = float(as_rational(beta))
    return b / (b - 1) * d * (1 - 2 ** (-1 / (b - 1))) ** (-d) * 2.0 ** m


def grid_cardinality_bound(d: int, beta, m: int) -> float:
    return cardinality_D_bound(d, beta, m) * 2.0 ** d


def exp_sum_check(d: int, ell: int, p: float) -> tuple[float, float]:
    """``sum_{|k|_1 = ell} |2^k|_p`` and its closed-form upper bound ``d 2^(ell+d-1)``."""
    if d < 1 or ell < 0 or p < 1:
        raise ValueError("need d >= 1, ell >= 0, p >= 1")
    exact = 0.0
    for k in _compositions(ell, d):
        v = np.ldexp(1.0, np.array(k))
        exact += float(v.max()) if math.isinf(p) else float(np.sum(v ** p) ** (1.0 / p))
    return exact, float(d * 2 ** (ell + d - 1))
