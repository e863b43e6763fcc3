"""Quadrature estimates of L_p, sup and homogeneous W^1_p distances.

The W^1_p norm here is ``(sum_i int |d_i g|^p)^(1/p)`` (max of ess sup for
``p = inf``) with no L_p term. Deterministic nodes are cell midpoints, which
keeps them off the dyadic hyperplanes where piecewise-linear gradients jump.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "QuadratureSpec",
    "ErrorReport",
    "default_quadrature",
    "nodes",
    "w1p_error",
    "lp_error",
    "sup_error",
    "measure",
    "mixed_holder_seminorm_lb",
    "ZERO",
]

_BATCH = 1 << 16


@dataclass(frozen=True)
class QuadratureSpec:
    """``scheme`` is ``"midpoint"`` (``n`` nodes per axis) or ``"mc"`` (``N`` uniform nodes, ``seed``)."""

    scheme: str = "midpoint"
    n: int = 64
    N: int = 1_000_000
    seed: int = 42

    def __post_init__(self):
        if self.scheme not in ("midpoint", "mc"):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.scheme == "midpoint" and self.n < 2:
            raise ValueError("midpoint scheme needs n >= 2")
        if self.scheme == "mc" and self.N < 1000:
            raise ValueError("Monte Carlo scheme needs N >= 1000")

    def size(self, d: int) -> int:
        return self.n ** d if self.scheme == "midpoint" else self.N


def default_quadrature(d: int, m: int) -> QuadratureSpec:
    """Midpoint rule with ``2^(m+2)`` nodes per axis for ``d <= 2``; Monte Carlo otherwise."""
    if d <= 2:
        return QuadratureSpec("midpoint", n=2 ** (m + 2))
    return QuadratureSpec("mc", N=1_000_000, seed=42)


def nodes(q: QuadratureSpec, d: int):
    """Yield batches of nodes (equal weights ``1/size``)."""
    if q.scheme == "midpoint":
        if d > 3:
            raise ValueError("tensor midpoint scheme is limited to d <= 3")
        axis = (np.arange(q.n) + 0.5) / q.n
        total = q.n ** d
        for start in range(0, total, _BATCH):
            idx = np.arange(start, min(total, start + _BATCH))
            cols = []
            for _ in range(d):
                cols.append(axis[idx % q.n])
                idx = idx // q.n
            yield np.stack(cols[::-1], axis=1)
    else:
        rng = np.random.default_rng(q.seed)
        remaining = q.N
        while remaining:
            n = min(remaining, _BATCH)
            yield rng.random((n, d))
            remaining -= n


def _value(g, X):
    return np.asarray(g.value(X) if hasattr(g, "value") else g(X), dtype=float)


def _grad(g, X):
    return np.asarray(g.grad(X), dtype=float)


class _Zero:
    def value(self, X):
        return np.zeros(len(X))

    def grad(self, X):
        return np.zeros_like(np.asarray(X, dtype=float))


ZERO = _Zero()


def _dim(*gs) -> int:
    for g in gs:
        d = getattr(g, "d", None)
        if d is not None:
            return int(d)
    raise ValueError("cannot infer dimension; pass d explicitly")


def _accumulate(samples: Callable[[np.ndarray], np.ndarray], q: QuadratureSpec, d: int, p: float):
    """Mean of ``samples`` (per-node integrand) and its standard error, or the max for p = inf."""
    parts, sq, peak, count = [], [], 0.0, 0
    for X in nodes(q, d):
        h = samples(X)
        count += len(h)
        if math.isinf(p):
            peak = max(peak, float(np.max(h)) if len(h) else 0.0)
        else:
            parts.append(np.sum(h))
            sq.append(np.sum(h * h))
    if math.isinf(p):
        return peak, 0.0, count
    mean = float(np.sum(parts)) / count
    var = max(float(np.sum(sq)) / count - mean * mean, 0.0)
    return mean, math.sqrt(var / count), count


def _finish(mean: float, se: float, p: float, scheme: str) -> tuple[float, float]:
    if math.isinf(p):
        return mean, 0.0
    value = mean ** (1.0 / p)
    if scheme != "mc" or mean == 0:
        return value, 0.0
    return value, value / (p * mean) * se


def _check_p(p: float) -> float:
    p = float(p)
    if math.isnan(p) or p < 1:
        raise ValueError("p must lie in [1, inf]")
    return p


def w1p_error(g1, g2, q: QuadratureSpec, p: float = 2.0, d: int | None = None,
              with_se: bool = False):
    """Estimate ``||g1 - g2||`` in homogeneous W^1_p; both need ``.grad``."""
    p = _check_p(p)
    d = _dim(g1, g2) if d is None else d

    def integrand(X):
        G = np.abs(_grad(g1, X) - _grad(g2, X))
        return np.max(G, axis=1) if math.isinf(p) else np.sum(G ** p, axis=1)

    mean, se, _ = _accumulate(integrand, q, d, p)
    value, err = _finish(mean, se, p, q.scheme)
    return (value, err) if with_se else value


def lp_error(g1, g2, q: QuadratureSpec, p: float = 2.0, d: int | None = None,
             with_se: bool = False):
    """Estimate ``||g1 - g2||_{L_p}``."""
    p = _check_p(p)
    d = _dim(g1, g2) if d is None else d

    def integrand(X):
        v = np.abs(_value(g1, X) - _value(g2, X))
        return v if math.isinf(p) else v ** p

    mean, se, _ = _accumulate(integrand, q, d, p)
    value, err = _finish(mean, se, p, q.scheme)
    return (value, err) if with_se else value


def sup_error(g1, g2, q: QuadratureSpec, d: int | None = None) -> float:
    """Max of ``|g1 - g2|`` over the nodes (a lower estimate of the sup)."""
    return lp_error(g1, g2, q, math.inf, d)


@dataclass(frozen=True)
class ErrorReport:
    value_Lp: float
    value_W1p: float
    value_sup: float
    std_error_Lp: float
    std_error_W1p: float
    p: float
    scheme: str
    nodes: int
    seed: int | None
    stats: dict = field(default_factory=dict)
    note: str = "homogeneous W^1_p (gradient part only)"


def measure(g1, g2, q: QuadratureSpec, p: float = 2.0, d: int | None = None,
            stats: dict | None = None) -> ErrorReport:
    d = _dim(g1, g2) if d is None else d
    lp, lp_se = lp_error(g1, g2, q, p, d, with_se=True)
    w, w_se = w1p_error(g1, g2, q, p, d, with_se=True)
    sup = sup_error(g1, g2, q, d)
    return ErrorReport(lp, w, sup, lp_se, w_se, p, q.scheme, q.size(d),
                       q.seed if q.scheme == "mc" else None, dict(stats or {}))


def _second_difference(f, X, H, axes: np.ndarray):
    """Mixed second difference ``Delta^{2,u}_h f(x)``; ``axes`` is the per-sample mask of ``u``."""
    n, d = X.shape
    out = np.zeros(n)
    for offsets in itertools.product((0, 1, 2), repeat=d):
        off = np.array(offsets)
        valid = ~np.any((off[None, :] != 0) & ~axes, axis=1)
        if not valid.any():
            continue
        w = float(np.prod(np.where(off == 1, -2.0, 1.0)))
        out[valid] += w * _value(f, X[valid] + off[None, :] * H[valid])
    return out


def mixed_holder_seminorm_lb(f, alpha: float, budget: int = 20000, seed: int = 0,
                             d: int | None = None, lattice: int = 8) -> float:
    """Lower estimate of the mixed Hoelder-Zygmund norm of ``f`` from sampled difference quotients.

    Samples a coordinate subset ``u``, a base point ``x`` and steps ``h`` on the
    lattice ``2^-lattice Z^d`` with ``x + 2h`` inside the cube, and returns the
    largest ``prod_{i in u} h_i^-alpha |Delta^{2,u}_h f(x)|`` seen (``u`` empty
    gives ``|f(x)|``).
    """
    if not 0 < alpha <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    d = _dim(f) if d is None else d
    rng = np.random.default_rng(seed)
    scale = 2 ** lattice
    best = 0.0
    done = 0
    while done < budget:
        n = min(4096, budget - done)
        axes = rng.random((n, d)) < 0.5
        hs = rng.integers(1, scale // 2 + 1, size=(n, d))
        # bias towards small steps too: log-uniform step sizes
        small = rng.random((n, d)) < 0.5
        hs = np.where(small, np.maximum(1, (2.0 ** rng.uniform(0, lattice - 1, (n, d))).astype(int)), hs)
        hs = np.where(axes, hs, 0)
        xs = np.floor(rng.random((n, d)) * (scale - 2 * hs + 1)).astype(np.int64)
        X = xs / scale
        H = hs / scale
        diff = np.abs(_second_difference(f, X, H, axes))
        q = np.prod(np.where(axes, H, 1.0) ** -alpha, axis=1) * diff
        best = max(best, float(np.max(q)))
        done += n
    return best
