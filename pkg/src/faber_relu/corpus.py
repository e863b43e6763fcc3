"""Test functions on [0, 1]^d that vanish on the boundary.

Members flagged ``certified`` have mixed Hoelder-Zygmund norm at most 1 for
every smoothness in their ``alpha_range``, so they lie in the unit ball the
approximation bounds are stated for.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .faber import FaberExpansion
from .index import enumerate_smolyak

__all__ = [
    "CorpusFunction",
    "poly_tent",
    "sine_product",
    "bspline_bump",
    "truncated_series",
    "zero_function",
    "CORPUS",
    "get_function",
    "parse_function_id",
]


@dataclass(frozen=True, eq=False)
class CorpusFunction:
    id: str
    d: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    alpha_range: tuple[float, float]
    certified: bool
    norm_bound: float | None = None
    closed_lambda: Callable[[Sequence[int], Sequence[int]], float] | None = None
    expansion: FaberExpansion | None = None
    params: dict = field(default_factory=dict)

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = x.reshape(1, -1) if single else x
        if x.shape[1] != self.d:
            raise ValueError(f"{self.id} expects points of dimension {self.d}")
        return x, single

    def value(self, x):
        X, single = self._points(x)
        out = self.evaluator(X)
        return float(out[0]) if single else out

    def grad(self, x):
        X, single = self._points(x)
        out = self.gradient(X)
        return out[0] if single else out

    def __call__(self, x):
        return self.value(x)

    def value_and_grad(self, x):
        return self.value(x), self.grad(x)


def _tensor(factors: Callable, derivs: Callable, scale: float):
    """Value and gradient of ``scale * prod_i g(x_i)`` from vectorized ``g`` and ``g'``."""

    def value(X):
        return scale * np.prod(factors(X), axis=1)

    def grad(X):
        F, D = factors(X), derivs(X)
        out = np.empty_like(X)
        for i in range(X.shape[1]):
            others = np.prod(np.delete(F, i, axis=1), axis=1)
            out[:, i] = scale * D[:, i] * others
        return out

    return value, grad


def poly_tent(d: int) -> CorpusFunction:
    """``2^-d prod x_i (1 - x_i)``; surpluses ``2^-d prod 2^(-2k_i-2)``."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    value, grad = _tensor(lambda X: X * (1 - X), lambda X: 1 - 2 * X, 2.0 ** -d)

    def lam(k, s):
        return 2.0 ** (-d - sum(2 * ki + 2 for ki in k))

    return CorpusFunction("poly_tent", d, value, grad, (1.0, 2.0), True, 1.0, lam)


def sine_product(d: int) -> CorpusFunction:
    """``pi^-2d prod sin(pi x_i)``. No surplus vanishes."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    value, grad = _tensor(lambda X: np.sin(np.pi * np.minimum(X, 1 - X)), lambda X: np.pi * np.cos(np.pi * X),
                          np.pi ** (-2 * d))

    def lam(k, s):
        out = np.pi ** (-2 * d)
        for ki, si in zip(k, s):
            h = 2.0 ** (-ki - 1)
            out *= math.sin(math.pi * (2 * si + 1) * h) * (1 - math.cos(math.pi * h))
        return out

    return CorpusFunction("sine_product", d, value, grad, (1.0, 2.0), True, 1.0, lam)


def _m3(t):
    t = np.asarray(t, dtype=float)
    return np.where((t >= 0) & (t < 1), t * t / 2,
                    np.where((t >= 1) & (t < 2), (-2 * t * t + 6 * t - 3) / 2,
                             np.where((t >= 2) & (t <= 3), (3 - t) ** 2 / 2, 0.0)))


def _m3_prime(t):
    t = np.asarray(t, dtype=float)
    return np.where((t >= 0) & (t < 1), t,
                    np.where((t >= 1) & (t < 2), -2 * t + 3,
                             np.where((t >= 2) & (t <= 3), t - 3, 0.0)))


def _psi(x):
    return _m3(3 * x)


def _psi_prime(x):
    return 3 * _m3_prime(3 * x)


def bspline_bump(d: int, alpha: float = 2.0, m_b: int = 3, y: Sequence[int] | None = None) -> CorpusFunction:
    """Sum of quadratic B-spline bumps of width ``2^-m_b`` along ``x_1``.

    ``f_y(x) = 18^-d 2^(-alpha m_b) (sum_j y_j psi(2^m_b x_1 - j + 1)) prod_{l>=2} psi(x_l)``
    with ``psi(x) = M3(3x)``; the default ``y`` alternates 1, 0, 1, ...
    """
    if d < 1 or m_b < 0:
        raise ValueError("need d >= 1 and m_b >= 0")
    if not 1.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (1, 2]")
    n = 2 ** m_b
    y = [1 - (j % 2) for j in range(n)] if y is None else [int(v) for v in y]
    if len(y) != n or any(v not in (0, 1) for v in y):
        raise ValueError(f"y must be a 0/1 vector of length {n}")
    yv = np.array(y, dtype=float)
    scale = 18.0 ** -d * 2.0 ** (-alpha * m_b)
    shifts = np.arange(1, n + 1)

    def first(X):
        t = 2.0 ** m_b * X[:, :1] - shifts[None, :] + 1
        return _psi(np.clip(t, -1, 2)) @ yv, (2.0 ** m_b * _psi_prime(np.clip(t, -1, 2))) @ yv

    def value(X):
        v, _ = first(X)
        return scale * v * np.prod(_psi(X[:, 1:]), axis=1)

    def grad(X):
        v, dv = first(X)
        F, D = _psi(X[:, 1:]), _psi_prime(X[:, 1:])
        out = np.empty_like(X)
        out[:, 0] = scale * dv * np.prod(F, axis=1)
        for i in range(1, d):
            others = np.prod(np.delete(F, i - 1, axis=1), axis=1)
            out[:, i] = scale * v * D[:, i - 1] * others
        return out

    return CorpusFunction("bspline_bump", d, value, grad, (alpha, alpha), True, 1.0,
                          params={"alpha": alpha, "m_b": m_b, "y": "".join(map(str, y))})


def truncated_series(d: int, alpha: float = 2.0, m_t: int = 6, seed: int = 0) -> CorpusFunction:
    """Random finite Faber series on ``{|k|_1 <= m_t}`` with saturated coefficient decay.

    Coefficients are uniform in ``[-1, 1] * 2^(-(alpha+1)d) 2^(-alpha|k|_1)``.
    Membership in the unit ball is not certified.
    """
    if d < 1 or m_t < 0:
        raise ValueError("need d >= 1 and m_t >= 0")
    rng = np.random.default_rng(seed)
    blocks = {}
    for k in enumerate_smolyak(d, m_t):
        shape = tuple(2 ** ki for ki in k)
        blocks[k] = rng.uniform(-1.0, 1.0, shape) * 2.0 ** (-(alpha + 1) * d - alpha * sum(k))
    exp = FaberExpansion(d, blocks)

    def lam(k, s):
        block = exp.coefficients.get(tuple(k))
        return 0.0 if block is None else float(block[tuple(s)])

    return CorpusFunction("truncated_series", d, exp.value, exp.grad, (alpha, alpha), False, None,
                          lam, exp, {"alpha": alpha, "m_t": m_t, "seed": seed})


def zero_function(d: int) -> CorpusFunction:
    return CorpusFunction("zero", d, lambda X: np.zeros(X.shape[0]), lambda X: np.zeros_like(X),
                          (1.0, 2.0), True, 0.0, lambda k, s: 0.0)


CORPUS = {
    "poly_tent": (poly_tent, "d>=1", "(1,2]", "certified"),
    "sine_product": (sine_product, "d>=1", "(1,2]", "certified"),
    "bspline_bump": (bspline_bump, "d>=1", "alpha (param)", "certified"),
    "truncated_series": (truncated_series, "d>=1", "alpha (param)", "not certified"),
    "zero": (zero_function, "d>=1", "(1,2]", "certified"),
}

_PARAM_TYPES = {"m_b": int, "m_t": int, "seed": int, "alpha": float, "y": str}


def parse_function_id(text: str) -> tuple[str, dict]:
    """Split ``name[:key=value,...]`` into the id and typed parameters."""
    name, _, rest = text.partition(":")
    if name not in CORPUS:
        raise ValueError(f"unknown corpus id {name!r}; known: {', '.join(CORPUS)}")
    params = {}
    for item in filter(None, rest.split(",")):
        key, sep, val = item.partition("=")
        if not sep or key not in _PARAM_TYPES:
            raise ValueError(f"bad corpus parameter {item!r}")
        params[key] = _PARAM_TYPES[key](val)
    if "y" in params:
        params["y"] = [int(c) for c in params["y"]]
    return name, params


def get_function(text: str, d: int, alpha: float | None = None) -> CorpusFunction:
    """Resolve a corpus id (optionally with parameters) at dimension ``d``."""
    name, params = parse_function_id(text)
    if name in ("bspline_bump", "truncated_series") and alpha is not None:
        params.setdefault("alpha", alpha)
    return CORPUS[name][0](d, **params)
