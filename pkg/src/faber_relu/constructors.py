"""Explicit ReLU networks: squaring and product gadgets, hat networks, compilers.

Squaring uses the sawtooth identity ``x^2 = x - sum_s g_s(x) / 4^s`` where
``g_s`` is the ``s``-fold composition of the tooth ``g(x) = 2 relu(x) - 4 relu(x - 1/2)``
on [0, 1]. Truncating after ``m`` teeth gives the piecewise-linear interpolant
of ``x^2`` at ``j 2^-m``.

Products of two factors use ``xy = u^2 - v^2`` with ``u = (x + y)/2`` and
``v = |x - y|/2``. When either factor is 0 the two branches receive the same
number and are evaluated by rows with the same weights in the same order, so
their difference is exactly 0. Products of ``d`` factors are binary trees of
such nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .faber import FunctionOracle
from .index import cardinality_D, enumerate_notched
from .relunet import Layer, ReluNetwork, SpecialNetwork, parallelize, special_to_standard
from .sampling import ApproxConfig, build_R

__all__ = [
    "EpsilonTooLarge",
    "CompilerPlan",
    "square_depth",
    "node_accuracy",
    "build_square_net",
    "build_pair_product_net",
    "build_product_net",
    "product_layers",
    "build_hat_net",
    "hat_terms",
    "plan",
    "compile_network",
    "compile_narrow",
    "compile_special",
]


class EpsilonTooLarge(ValueError):
    def __init__(self, eps: float, eps0: float):
        super().__init__(f"eps={eps:.17g} must be smaller than eps0={eps0:.17g}")
        self.eps = eps
        self.eps0 = eps0


# ---------------------------------------------------------------------------
# squaring and products


def square_depth(delta_node: float) -> int:
    """Smallest ``m`` with ``max(2^-2m, 2^(1-m)) <= delta_node``."""
    if not 0 < delta_node < 1:
        raise ValueError("accuracy must lie in (0, 1)")
    m = 1
    while max(2.0 ** (-2 * m), 2.0 ** (1 - m)) > delta_node:
        m += 1
    return m


def node_accuracy(d: int, delta: float) -> float:
    return delta / (3.0 * d)


class _Builder:
    """Accumulates layers as coordinate lists."""

    def __init__(self, n_in: int):
        self.layers: list[Layer] = []
        self.width = n_in
        self._reset()

    def _reset(self):
        self.rows, self.cols, self.vals, self.bias = [], [], [], []

    def neuron(self, entries, bias: float = 0.0) -> int:
        r = len(self.bias)
        for c, w in entries:
            self.rows.append(r)
            self.cols.append(c)
            self.vals.append(w)
        self.bias.append(bias)
        return r

    def close(self):
        n_out = len(self.bias)
        self.layers.append(Layer(n_out, self.width, self.rows, self.cols, self.vals, self.bias))
        self.width = n_out
        self._reset()


def _tooth_weights(t: int) -> tuple[float, float]:
    """Weights of the ``t``-th tooth pair inside ``-g_t / 4^t``."""
    return -2.0 / 4.0 ** t, 4.0 / 4.0 ** t


def _square_step(b: _Builder, prev: dict, t: int, branches: Sequence[str]) -> dict:
    """Hidden layer ``t >= 2`` of the squaring chain for interleaved branches."""
    acc = {}
    for br in branches:
        if t == 2:
            # acc_1 = t1 (relu(u) = u on [0, 1]), so f_1 = t1/2 + t2
            acc[br] = b.neuron([(prev[br]["t1"], 0.5), (prev[br]["t2"], 1.0)])
        else:
            w1, w2 = _tooth_weights(t - 1)
            acc[br] = b.neuron([(prev[br]["acc"], 1.0), (prev[br]["t1"], w1), (prev[br]["t2"], w2)])
    t1, t2 = {}, {}
    for br in branches:
        t1[br] = b.neuron([(prev[br]["t1"], 2.0), (prev[br]["t2"], -4.0)])
    for br in branches:
        t2[br] = b.neuron([(prev[br]["t1"], 2.0), (prev[br]["t2"], -4.0)], -0.5)
    return {br: {"acc": acc[br], "t1": t1[br], "t2": t2[br]} for br in branches}


def _square_output(prev: dict, m: int, br: str, sign: float) -> list:
    if m == 1:
        return [(prev[br]["t1"], 0.5 * sign), (prev[br]["t2"], sign)]
    w1, w2 = _tooth_weights(m)
    return [(prev[br]["acc"], sign), (prev[br]["t1"], w1 * sign), (prev[br]["t2"], w2 * sign)]


def build_square_net(m_sq: int) -> ReluNetwork:
    """One-input network computing the interpolant of ``x^2`` at ``j 2^-m_sq`` on [0, 1]."""
    if m_sq < 1:
        raise ValueError("m_sq must be >= 1")
    b = _Builder(1)
    state = {"u": {"t1": b.neuron([(0, 1.0)]), "t2": b.neuron([(0, 1.0)], -0.5)}}
    b.close()
    for t in range(2, m_sq + 1):
        state = _square_step(b, state, t, ("u",))
        b.close()
    b.neuron(_square_output(state, m_sq, "u", 1.0))
    b.close()
    return ReluNetwork(tuple(b.layers))


def _merge_entries(*groups):
    """Concatenate entry lists and sort by column so row sums run in column order."""
    out = [e for g in groups for e in g]
    return sorted(out, key=lambda e: e[0])


def product_layers(d: int, m_sq: int) -> tuple[Layer, ...]:
    """Layers of the ``d``-factor product tree reading a width-``d`` input."""
    if d < 2:
        raise ValueError("product arity must be >= 2")
    b = _Builder(d)
    wires = list(range(d))
    while True:
        pairs = [(wires[2 * i], wires[2 * i + 1]) for i in range(len(wires) // 2)]
        carry = wires[-1] if len(wires) % 2 else None
        root = len(wires) == 2

        def carry_forward(c):
            return None if c is None else b.neuron([(c, 1.0)])

        # first layer: c = relu(x + y), a = relu(x - y), b = relu(y - x)
        states = []
        for x, y in pairs:
            c = b.neuron([(x, 1.0), (y, 1.0)])
            a = b.neuron(_merge_entries([(x, 1.0)], [(y, -1.0)]))
            bb = b.neuron(_merge_entries([(x, -1.0)], [(y, 1.0)]))
            states.append((c, a, bb))
        carry = carry_forward(carry)
        b.close()
        # first squaring layer: teeth of u = c/2 and v = (a + b)/2, branches interleaved
        new_states = []
        for c, a, bb in states:
            u1 = b.neuron([(c, 0.5)])
            v1 = b.neuron([(a, 0.5), (bb, 0.5)])
            u2 = b.neuron([(c, 0.5)], -0.5)
            v2 = b.neuron([(a, 0.5), (bb, 0.5)], -0.5)
            new_states.append({"u": {"t1": u1, "t2": u2}, "v": {"t1": v1, "t2": v2}})
        carry = carry_forward(carry)
        b.close()
        for t in range(2, m_sq + 1):
            new_states = [_square_step(b, st, t, ("u", "v")) for st in new_states]
            carry = carry_forward(carry)
            b.close()
        combos = [_merge_entries(_square_output(st, m_sq, "u", 1.0), _square_output(st, m_sq, "v", -1.0))
                  for st in new_states]
        if root:
            b.neuron(combos[0])
            b.close()
            return tuple(b.layers)
        wires = [b.neuron(entries) for entries in combos]
        if carry is not None:
            wires.append(b.neuron([(carry, 1.0)]))
        b.close()


@lru_cache(maxsize=64)
def _product_layers_cached(d: int, m_sq: int) -> tuple[Layer, ...]:
    return product_layers(d, m_sq)


def _pair_error(net: ReluNetwork, delta: float, n: int = 4096, seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    v, g = net.value_and_grad(X)
    ok_v = np.max(np.abs(v - X[:, 0] * X[:, 1])) <= delta
    ok_g = np.max(np.abs(g - X[:, ::-1])) <= delta
    return bool(ok_v and ok_g)


def build_pair_product_net(delta_node: float, verify: bool = True) -> ReluNetwork:
    """Two-input network with ``|P - xy| <= delta_node``, gradient error ``<= delta_node``, ``P(0, y) = P(x, 0) = 0``."""
    m_sq = square_depth(delta_node)
    while True:
        net = ReluNetwork(_product_layers_cached(2, m_sq))
        if not verify or _pair_error(net, delta_node):
            return net
        m_sq += 1


def build_product_net(d: int, delta: float) -> ReluNetwork:
    """Binary tree of pair nodes approximating ``prod x_i`` within ``delta`` (value and gradient)."""
    if d < 2:
        raise ValueError("product arity must be >= 2")
    if not 0 < delta < 1:
        raise ValueError("accuracy must lie in (0, 1)")
    return ReluNetwork(_product_layers_cached(d, square_depth(node_accuracy(d, delta))))


def _gadget_layers(k: Sequence[int], s: Sequence[int]) -> tuple[Layer, Layer]:
    d = len(k)
    rows = np.arange(2 * d)
    cols = np.repeat(np.arange(d), 2)
    scale = np.ldexp(1.0, np.asarray(k) + 1)
    vals = np.stack([scale, -scale], axis=1).ravel()
    off = 2.0 * np.asarray(s, dtype=float) + 1.0
    bias = np.stack([-off, off], axis=1).ravel()
    first = Layer(2 * d, d, rows, cols, vals, bias)
    second = Layer(d, 2 * d, np.repeat(np.arange(d), 2), np.arange(2 * d), -np.ones(2 * d), np.ones(d))
    return first, second


def _check_term(k, s):
    if len(k) != len(s) or not k:
        raise ValueError("level and position must have equal nonzero length")
    for ki, si in zip(k, s):
        if ki < 0 or not 0 <= si < 2 ** ki:
            raise ValueError(f"invalid term k={tuple(k)}, s={tuple(s)}")


def build_hat_net(k: Sequence[int], s: Sequence[int], delta: float) -> ReluNetwork:
    """Network approximating ``phi_{k,s}`` within ``delta``; exactly 0 outside its support.

    Two gadget layers compute ``y_i = relu(1 - relu(2^(k_i+1) x_i - 2 s_i - 1) - relu(2 s_i + 1 - 2^(k_i+1) x_i))``,
    the univariate hats, followed by the product tree.
    """
    k, s = tuple(int(v) for v in k), tuple(int(v) for v in s)
    _check_term(k, s)
    if not 0 < delta < 1:
        raise ValueError("accuracy must lie in (0, 1)")
    first, second = _gadget_layers(k, s)
    d = len(k)
    if d == 1:
        return ReluNetwork((first, second, Layer(1, 1, [0], [0], [1.0], None)))
    tail = _product_layers_cached(d, square_depth(node_accuracy(d, delta)))
    return ReluNetwork((first, second, *tail))


# ---------------------------------------------------------------------------
# compilation


@dataclass(frozen=True)
class CompilerPlan:
    cfg: ApproxConfig
    m: int
    delta: float
    eps0: float
    B: float

    @property
    def m_sq(self) -> int:
        return square_depth(node_accuracy(self.cfg.d, self.delta))

    def as_dict(self) -> dict:
        return {"m": self.m, "delta": self.delta, "eps0": self.eps0, "B": self.B, "K1": self.cfg.K1}


def _pow_root(p: float, power: float) -> float:
    return 1.0 if math.isinf(p) else (p + 1.0) ** (power / p)


def eps0_value(cfg: ApproxConfig) -> float:
    d, a = cfg.d, cfg.alpha
    second = d / (2.0 ** (a * d) * (1.0 - 2.0 ** (1.0 - a)))
    third = cfg.K1 * d * d / (_pow_root(cfg.p, d) * 2.0 ** ((a + 1.0) * d) * cfg.notch_factor ** d)
    return min(1.0, second, third)


def plan(cfg: ApproxConfig, eps: float | None = None) -> CompilerPlan:
    """Level ``m``, hat accuracy ``delta``, threshold ``eps0`` and base ``B`` for target ``eps``."""
    eps = cfg.eps if eps is None else eps
    if eps is None or not eps > 0:
        raise ValueError("a positive eps is required")
    if cfg.d < 2:
        raise ValueError("compilation requires d >= 2")
    cfg = cfg.with_eps(eps)
    d, a, p = cfg.d, cfg.alpha, cfg.p
    e0 = eps0_value(cfg)
    if eps >= e0:
        raise EpsilonTooLarge(eps, e0)
    den = _pow_root(p, d) * 2.0 ** ((a + 1.0) * d) * cfg.notch_factor ** d
    m = math.ceil(math.log2(2.0 * cfg.K1 * d * d / (eps * den)) / (a - 1.0))
    delta = (1.0 - 2.0 ** (1.0 - a)) * 2.0 ** (a * d) * eps / (2.0 * d)
    B = (1.0 - 2.0 ** (-1.0 / (cfg.beta - 1.0))) * (
        _pow_root(p, 1) * 2.0 ** (a + 1.0) * cfg.notch_factor / d ** (2.0 * a / d)) ** (1.0 / (a - 1.0))
    return CompilerPlan(cfg, max(m, 0), delta, e0, B)


def hat_terms(f: FunctionOracle, pl: CompilerPlan):
    """``(k, s, lambda)`` for every term of the sampling operator, level by level."""
    R = build_R(f, pl.cfg, pl.m)
    for (k, s), lam in R.items():
        yield k, s, lam


def _hat_nets(f, pl):
    terms = list(hat_terms(f, pl))
    nets = [build_hat_net(k, s, pl.delta) for k, s, _ in terms]
    return terms, nets


def compile_network(f: FunctionOracle, cfg: ApproxConfig, eps: float | None = None) -> tuple[ReluNetwork, CompilerPlan]:
    """Wide network ``sum_{k,s} lambda_{k,s}(f) Phi_{k,s}`` approximating ``f`` within ``eps`` in W^1_p."""
    pl = plan(cfg, eps)
    terms, nets = _hat_nets(f, pl)
    if not any(lam != 0 for _, _, lam in terms):
        return ReluNetwork.zero(cfg.d), pl
    return parallelize(nets, [lam for _, _, lam in terms]), pl


def compile_special(f: FunctionOracle, cfg: ApproxConfig, eps: float | None = None) -> tuple[SpecialNetwork, CompilerPlan]:
    """Narrow-deep special network chaining the hat networks one after another."""
    pl = plan(cfg, eps)
    terms, nets = _hat_nets(f, pl)
    return chain_special(nets, [lam for _, _, lam in terms], cfg.d), pl


def compile_narrow(f: FunctionOracle, cfg: ApproxConfig, eps: float | None = None) -> tuple[ReluNetwork, CompilerPlan]:
    special, pl = compile_special(f, cfg, eps)
    return special_to_standard(special), pl


def chain_special(nets: Sequence[ReluNetwork], lambdas: Sequence[float], d: int) -> SpecialNetwork:
    """Chain networks sequentially with ``d`` source rows and one collation row per hidden layer.

    Hidden layers are laid out as ``[source (d) | block rows | collation (1)]``.
    The collation row in the first layer of block ``j+1`` adds ``lambda_j`` times
    the output of block ``j`` to the running sum.
    """
    if len(nets) != len(lambdas):
        raise ValueError("need one coefficient per network")
    if not nets:
        nets, lambdas = [ReluNetwork.zero(d)], [0.0]
    layers: list[Layer] = []
    prev_width = d
    prev_block = None  # (offset of block rows in the previous layer, last layer of previous block, lambda)
    first_layer = True
    for net, lam in zip(nets, lambdas):
        if net.d != d:
            raise ValueError("all networks must have input dimension d")
        hidden = net.layers[:-1]
        for h, layer in enumerate(hidden):
            width = d + layer.n_out + 1
            coll = width - 1
            rows = [np.arange(d)]
            cols = [np.arange(d)]
            vals = [np.ones(d)]
            bias = np.zeros(width)
            bias[d:d + layer.n_out] = layer.bias
            col_off = 0 if h == 0 else d
            rows.append(layer.rows + d)
            cols.append(layer.cols + col_off)
            vals.append(layer.vals)
            if not first_layer:
                if h == 0 and prev_block is not None:
                    poff, last, plam = prev_block
                    v = plam * last.vals
                    keep = v != 0
                    rows.append(np.full(int(keep.sum()), coll))
                    cols.append(last.cols[keep] + poff)
                    vals.append(v[keep])
                    bias[coll] += plam * float(last.bias[0])
                rows.append(np.array([coll]))
                cols.append(np.array([prev_width - 1]))
                vals.append(np.ones(1))
            layers.append(Layer(width, prev_width, np.concatenate(rows), np.concatenate(cols),
                                np.concatenate(vals), bias))
            prev_width = width
            first_layer = False
        prev_block = (d, net.layers[-1], float(lam))
    poff, last, plam = prev_block
    v = plam * last.vals
    keep = v != 0
    out = Layer(1, prev_width, np.concatenate([np.zeros(int(keep.sum()), dtype=np.int64), [0]]),
                np.concatenate([last.cols[keep] + poff, [prev_width - 1]]),
                np.concatenate([v[keep], [1.0]]), [plam * float(last.bias[0])])
    layers.append(out)
    return SpecialNetwork(tuple(layers))


def term_count(cfg: ApproxConfig, m: int) -> int:
    return cardinality_D(enumerate_notched(cfg.d, cfg.beta, m))
