"""Sparse-grid sampling operator and its W^1_p error budget."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .faber import FaberExpansion, FunctionOracle, expansion_from_function
from .index import IndexSet, enumerate_index_set, enumerate_notched

__all__ = [
    "ApproxConfig",
    "build_R",
    "build_operator",
    "theorem31_bound",
    "qk_layer",
    "qk_norm_bound",
    "decay_bound",
]


def _root(p: float, power: float = 1.0) -> float:
    """``(p+1)^(power/p)``, with the p = inf limit 1."""
    return 1.0 if math.isinf(p) else (p + 1.0) ** (power / p)


@dataclass(frozen=True)
class ApproxConfig:
    """Smoothness ``alpha``, notch ``beta``, norm exponent ``p`` and target ``eps``."""

    d: int
    alpha: float
    beta: float
    p: float = 2.0
    eps: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "p", float(self.p))
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")
        if not 1.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in (1, 2], got {self.alpha}")
        if not self.beta > self.alpha:
            raise ValueError(f"beta must exceed alpha, got beta={self.beta}, alpha={self.alpha}")
        if math.isnan(self.p) or self.p < 1.0:
            raise ValueError(f"p must lie in [1, inf], got {self.p}")
        if self.eps is not None and not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    @property
    def K1(self) -> float:
        a, b = self.alpha, self.beta
        return 2.0 * _root(self.p) * max(2.0 * b / (b - 1.0), 1.0 / (2.0 ** (a - 1.0) - 1.0))

    @property
    def notch_factor(self) -> float:
        """``1 - 2^(-(beta-alpha)/(beta-1))``."""
        return 1.0 - 2.0 ** (-(self.beta - self.alpha) / (self.beta - 1.0))

    def with_eps(self, eps: float) -> "ApproxConfig":
        return ApproxConfig(self.d, self.alpha, self.beta, self.p, eps)


def decay_bound(d: int, alpha: float, level_sum: int) -> float:
    """Coefficient bound ``2^(-(alpha+1)d) 2^(-alpha |k|_1)`` for the unit ball."""
    return 2.0 ** (-(alpha + 1.0) * d - alpha * level_sum)


def theorem31_bound(cfg: ApproxConfig, m: int) -> float:
    """Upper bound on ``||f - R_beta(m, f)||`` in homogeneous W^1_p for unit-ball ``f``."""
    if m < 0:
        raise ValueError("m must be >= 0")
    d, a = cfg.d, cfg.alpha
    num = cfg.K1 * d * d * 2.0 ** (-m * (a - 1.0))
    den = _root(cfg.p, d) * 2.0 ** ((a + 1.0) * d) * cfg.notch_factor ** d
    return num / den


def build_operator(f: FunctionOracle, levels: IndexSet) -> FaberExpansion:
    """Restriction of the Faber expansion of ``f`` to ``levels``."""
    return expansion_from_function(f, levels, levels.d)


def build_R(f: FunctionOracle, cfg: ApproxConfig, m: int, kind: str = "notched") -> FaberExpansion:
    """Sampling operator on the notched index set (or ``"smolyak"``/``"full"`` for comparison)."""
    levels = enumerate_notched(cfg.d, cfg.beta, m) if kind == "notched" else \
        enumerate_index_set(kind, cfg.d, m)
    return build_operator(f, levels)


def qk_layer(f: FunctionOracle, k: Sequence[int]) -> FaberExpansion:
    """Single-level part ``q_k(f)``: all ``2^|k|_1`` terms at level ``k``."""
    k = tuple(int(v) for v in k)
    if min(k) < 0:
        raise ValueError("level must be non-negative")
    return expansion_from_function(f, [k], len(k))


def qk_norm_bound(d: int, alpha: float, p: float, k: Sequence[int]) -> float:
    """Bound ``2^(-alpha|k|_1+1) |2^k|_p / ((p+1)^((d-1)/p) 2^((alpha+1)d))`` on ``||q_k(f)||``."""
    k = [int(v) for v in k]
    if math.isinf(p):
        norm = float(max(2.0 ** v for v in k))
    else:
        norm = float(sum(2.0 ** (p * v) for v in k) ** (1.0 / p))
    return 2.0 ** (-alpha * sum(k) + 1.0) * norm / (_root(p, d - 1) * 2.0 ** ((alpha + 1.0) * d))
