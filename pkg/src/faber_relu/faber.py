"""Faber (hierarchical hat) basis on [0, 1]^d.

Univariate functions for level ``k >= 0`` and position ``s`` in
``0..2**k - 1`` are ``phi_{k,s}(x) = M2(2**(k+1) x - 2 s)`` with the hat
``M2(t) = max(0, 1 - |t - 1|)``. Level ``-1`` carries the two boundary
functions ``1 - x`` and ``x``. Tensor-product functions multiply one factor
per axis.

Coefficients are hierarchical surpluses ``lambda_{k,s}(f)``: the tensor
product over axes of ``-1/2`` times the second difference with step
``2**-(k_i+1)`` anchored at ``s_i / 2**k_i`` (point evaluation at ``s_i`` on
level ``-1`` axes). They are computed from exact dyadic sample points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .index import IndexSet, Level

FunctionOracle = Callable[[np.ndarray], np.ndarray]

__all__ = [
    "FunctionOracle",
    "FaberExpansion",
    "hat_eval",
    "hat_grad",
    "tensor_hat_eval",
    "tensor_hat_grad",
    "lambda_coefficient",
    "faber_coefficients",
    "expansion_from_function",
]


def _positions(k: int) -> int:
    return 2 if k == -1 else 2 ** k


def _check_hat(k: int, s: int) -> None:
    if k < -1:
        raise ValueError(f"level must be >= -1, got {k}")
    if not 0 <= s < _positions(k):
        raise ValueError(f"position {s} invalid for level {k}")


def _check_domain(x: np.ndarray) -> None:
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise ValueError("evaluation point outside [0, 1]")


def hat_eval(k: int, s: int, x):
    """Value of ``phi_{k,s}`` at ``x`` (scalar or array) in [0, 1]."""
    _check_hat(k, s)
    x = np.asarray(x, dtype=float)
    _check_domain(x)
    if k == -1:
        out = 1.0 - x if s == 0 else x.copy()
    else:
        t = np.ldexp(x, k + 1) - 2 * s
        out = np.maximum(0.0, 1.0 - np.abs(t - 1.0))
    return float(out) if out.ndim == 0 else out


def hat_grad(k: int, s: int, x):
    """Right derivative of ``phi_{k,s}``; zero outside the support and at ``x = 1``."""
    _check_hat(k, s)
    x = np.asarray(x, dtype=float)
    _check_domain(x)
    if k == -1:
        out = np.full_like(x, -1.0 if s == 0 else 1.0)
    else:
        t = np.ldexp(x, k + 1) - 2 * s
        slope = 2.0 ** (k + 1)
        out = np.where((t >= 0) & (t < 1), slope, np.where((t >= 1) & (t < 2), -slope, 0.0))
    return float(out) if out.ndim == 0 else out


def _as_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {x.shape[1]}")
    return x


def tensor_hat_eval(k: Sequence[int], s: Sequence[int], x):
    """``prod_i phi_{k_i,s_i}(x_i)`` for one point ``(d,)`` or many ``(n, d)``."""
    if len(k) != len(s):
        raise ValueError("level and position lengths differ")
    single = np.asarray(x).ndim == 1
    pts = _as_points(x, len(k))
    out = np.ones(pts.shape[0])
    for i, (ki, si) in enumerate(zip(k, s)):
        out = out * hat_eval(ki, si, pts[:, i])
    return float(out[0]) if single else out


def tensor_hat_grad(k: Sequence[int], s: Sequence[int], x):
    """Gradient of the tensor hat; ``(d,)`` for one point, ``(n, d)`` for many."""
    if len(k) != len(s):
        raise ValueError("level and position lengths differ")
    single = np.asarray(x).ndim == 1
    pts = _as_points(x, len(k))
    d = len(k)
    vals = np.stack([np.atleast_1d(hat_eval(k[i], s[i], pts[:, i])) for i in range(d)], axis=1)
    ders = np.stack([np.atleast_1d(hat_grad(k[i], s[i], pts[:, i])) for i in range(d)], axis=1)
    out = np.empty_like(pts)
    for j in range(d):
        others = np.prod(np.delete(vals, j, axis=1), axis=1) if d > 1 else np.ones(pts.shape[0])
        out[:, j] = ders[:, j] * others
    return out[0] if single else out


# ---------------------------------------------------------------------------
# coefficient functionals


def _stencil_numerators(k: int, top: int) -> np.ndarray:
    """Stencil abscissae of one axis as numerators over ``2**top``."""
    if k == -1:
        return np.array([0, 1 << top], dtype=np.int64)
    return np.arange(2 ** (k + 1) + 1, dtype=np.int64) << (top - k - 1)


def _apply_surplus(values: np.ndarray, k: Sequence[int]) -> np.ndarray:
    """Turn tensor-grid samples into hierarchical surpluses, axis by axis."""
    out = values
    for axis, ki in enumerate(k):
        if ki == -1:
            continue
        left = np.take(out, np.arange(0, out.shape[axis] - 1, 2), axis=axis)
        mid = np.take(out, np.arange(1, out.shape[axis], 2), axis=axis)
        right = np.take(out, np.arange(2, out.shape[axis], 2), axis=axis)
        out = -0.5 * ((left - mid) + (right - mid))
    return out


def faber_coefficients(f: FunctionOracle, levels: Iterable[Sequence[int]]) -> dict[Level, np.ndarray]:
    """Surpluses of ``f`` for every level, sharing one batched oracle call.

    All stencil points of all levels are deduplicated on an exact dyadic
    lattice, so each distinct point is evaluated once.
    """
    levels = [tuple(int(v) for v in k) for k in levels]
    if not levels:
        return {}
    d = len(levels[0])
    top = max(1, max(max(k) for k in levels) + 1)
    blocks, shapes = [], []
    for k in levels:
        if len(k) != d:
            raise ValueError("levels of mixed dimension")
        axes = [_stencil_numerators(ki, top) for ki in k]
        shapes.append(tuple(len(a) for a in axes))
        mesh = np.meshgrid(*axes, indexing="ij")
        blocks.append(np.stack([a.ravel() for a in mesh], axis=1))
    stacked = np.concatenate(blocks, axis=0)
    unique, inverse = np.unique(stacked, axis=0, return_inverse=True)
    samples = np.asarray(f(np.ldexp(unique.astype(float), -top)), dtype=float).reshape(-1)
    if samples.shape[0] != unique.shape[0]:
        raise ValueError("oracle returned the wrong number of values")
    gathered = samples[inverse.reshape(-1)]
    out, start = {}, 0
    for k, shape in zip(levels, shapes):
        n = int(np.prod(shape))
        out[k] = _apply_surplus(gathered[start:start + n].reshape(shape), k)
        start += n
    return out


def lambda_coefficient(f: FunctionOracle, k: Sequence[int], s: Sequence[int]) -> float:
    """Single surplus ``lambda_{k,s}(f)`` from ``3**d`` (fewer on level -1 axes) samples."""
    k = tuple(int(v) for v in k)
    s = tuple(int(v) for v in s)
    if len(k) != len(s):
        raise ValueError("level and position lengths differ")
    for ki, si in zip(k, s):
        _check_hat(ki, si)
    top = max(1, max(k) + 1)
    axes = []
    for ki, si in zip(k, s):
        if ki == -1:
            axes.append(np.array([si << top], dtype=np.int64))
        else:
            base = (2 * si) << (top - ki - 1)
            step = 1 << (top - ki - 1)
            axes.append(np.array([base, base + step, base + 2 * step], dtype=np.int64))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.ldexp(np.stack([a.ravel() for a in mesh], axis=1).astype(float), -top)
    vals = np.asarray(f(pts), dtype=float).reshape([len(a) for a in axes])
    # same arithmetic as the batched path, so both agree bit for bit
    vals = _apply_surplus(vals, k)
    return float(vals.reshape(-1)[0])


# ---------------------------------------------------------------------------
# expansions


def _level_shape(k: Level) -> tuple[int, ...]:
    return tuple(_positions(ki) for ki in k)


@dataclass(frozen=True)
class FaberExpansion:
    """Finite Faber series stored level by level.

    ``coefficients[k]`` is an array of shape ``(2**k_1, ..., 2**k_d)`` (size 2 on
    level -1 axes) whose entry ``s`` is the coefficient of ``phi_{k,s}``.
    """

    d: int
    coefficients: Mapping[Level, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, c in self.coefficients.items():
            k = tuple(int(v) for v in k)
            if len(k) != self.d or min(k) < -1:
                raise ValueError(f"invalid level {k} for dimension {self.d}")
            c = np.array(c, dtype=float)
            if c.shape != _level_shape(k):
                raise ValueError(f"coefficient block for {k} has shape {c.shape}")
            if not np.all(np.isfinite(c)):
                raise ValueError(f"non-finite coefficient at level {k}")
            c.setflags(write=False)
            clean[k] = c
        object.__setattr__(self, "coefficients", dict(sorted(clean.items())))

    @property
    def levels(self) -> list[Level]:
        return list(self.coefficients)

    @property
    def n_terms(self) -> int:
        return sum(c.size for c in self.coefficients.values())

    def __len__(self):
        return self.n_terms

    def items(self) -> Iterator[tuple[tuple[Level, tuple[int, ...]], float]]:
        for k, c in self.coefficients.items():
            for s in np.ndindex(c.shape):
                yield (k, s), float(c[s])

    def restrict(self, levels: Iterable[Sequence[int]]) -> "FaberExpansion":
        keep = {tuple(k) for k in levels}
        return FaberExpansion(self.d, {k: c for k, c in self.coefficients.items() if k in keep})

    def without(self, levels: Iterable[Sequence[int]]) -> "FaberExpansion":
        drop = {tuple(k) for k in levels}
        return FaberExpansion(self.d, {k: c for k, c in self.coefficients.items() if k not in drop})

    def prune(self, tol: float) -> "FaberExpansion":
        """Zero out coefficients with magnitude at or below ``tol``."""
        return FaberExpansion(self.d, {k: np.where(np.abs(c) > tol, c, 0.0)
                                       for k, c in self.coefficients.items()})

    def _level_parts(self, k: Level, pts: np.ndarray):
        """Active positions, values and right derivatives per axis for level ``k``."""
        parts = []
        for i, ki in enumerate(k):
            x = pts[:, i]
            if ki == -1:
                one = np.ones_like(x)
                parts.append([(np.zeros(len(x), dtype=np.int64), 1.0 - x, -one),
                              (np.ones(len(x), dtype=np.int64), x, one)])
                continue
            scaled = np.ldexp(x, ki)
            s = np.minimum(np.floor(scaled).astype(np.int64), 2 ** ki - 1)
            t = 2.0 * (scaled - s)
            val = np.maximum(0.0, 1.0 - np.abs(t - 1.0))
            slope = 2.0 ** (ki + 1)
            der = np.where(t < 1.0, slope, np.where(t < 2.0, -slope, 0.0))
            parts.append([(s, val, der)])
        return parts

    def _accumulate(self, x, want_grad: bool):
        pts = _as_points(x, self.d)
        _check_domain(pts)
        n = pts.shape[0]
        value = np.zeros(n)
        grad = np.zeros((n, self.d)) if want_grad else None
        for k, coef in self.coefficients.items():
            parts = self._level_parts(k, pts)
            for combo in _product(parts):
                idx = tuple(c[0] for c in combo)
                cs = coef[idx]
                vals = [c[1] for c in combo]
                prod = cs * np.prod(vals, axis=0)
                value += prod
                if want_grad:
                    for j in range(self.d):
                        others = cs.copy()
                        for i in range(self.d):
                            others = others * (combo[i][2] if i == j else vals[i])
                        grad[:, j] += others
        return value, grad

    def value(self, x) -> np.ndarray:
        return self._accumulate(x, False)[0]

    def grad(self, x) -> np.ndarray:
        return self._accumulate(x, True)[1]

    def value_and_grad(self, x):
        return self._accumulate(x, True)

    def __call__(self, x) -> np.ndarray:
        return self.value(x)

    # serialization: "k_1 .. k_d | s_1 .. s_d | coefficient"
    def to_text(self) -> str:
        lines = []
        for (k, s), c in self.items():
            lines.append(f"{' '.join(map(str, k))} | {' '.join(map(str, s))} | {c:.17g}")
        return "".join(line + "\n" for line in lines)

    @classmethod
    def from_text(cls, text: str) -> "FaberExpansion":
        blocks: dict[Level, np.ndarray] = {}
        d = None
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                ks, ss, cs = (part.split() for part in line.split("|"))
                k = tuple(int(v) for v in ks)
                s = tuple(int(v) for v in ss)
                (c,) = cs
            except ValueError as exc:
                raise ValueError(f"malformed expansion line {lineno}: {line!r}") from exc
            if d is None:
                d = len(k)
            if len(k) != d or len(s) != d:
                raise ValueError(f"dimension mismatch on line {lineno}")
            block = blocks.setdefault(k, np.zeros(_level_shape(k)))
            block[s] = float(c)
        if d is None:
            raise ValueError("empty expansion file")
        return cls(d, blocks)


def _product(parts):
    if not parts:
        yield ()
        return
    for head in parts[0]:
        for tail in _product(parts[1:]):
            yield (head, *tail)


def expansion_from_function(f: FunctionOracle, levels: IndexSet | Iterable[Sequence[int]],
                            d: int | None = None) -> FaberExpansion:
    """Faber expansion of ``f`` truncated to ``levels`` (which may include level -1 axes)."""
    levels = list(levels)
    if d is None:
        if not levels:
            raise ValueError("cannot infer dimension from an empty level list")
        d = len(levels[0])
    return FaberExpansion(d, faber_coefficients(f, levels))


def single_term(k: Sequence[int], s: Sequence[int], coefficient: float = 1.0) -> FaberExpansion:
    k = tuple(k)
    block = np.zeros(_level_shape(k))
    block[tuple(s)] = coefficient
    return FaberExpansion(len(k), {k: block})

