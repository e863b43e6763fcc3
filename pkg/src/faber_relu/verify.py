"""Quantitative checks of the approximation and construction bounds.

Each ``check_*`` function returns a list of :class:`CheckRow` (one per
parameter cell); a criterion passes when none of its rows is ``FAIL``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .constructors import (
    EpsilonTooLarge,
    build_hat_net,
    build_product_net,
    chain_special,
    compile_narrow,
    compile_network,
    node_accuracy,
    plan,
    square_depth,
)
from .corpus import bspline_bump, poly_tent, sine_product, truncated_series
from .faber import FaberExpansion, faber_coefficients, tensor_hat_eval, tensor_hat_grad
from .index import (
    cardinality_D,
    cardinality_D_bound,
    enumerate_notched,
    enumerate_smolyak,
    exp_sum_check,
    grid_cardinality,
    grid_cardinality_bound,
    grid_points,
)
from .metrics import QuadratureSpec, default_quadrature, nodes, w1p_error
from .relunet import (
    Layer,
    ReluNetwork,
    architecture_key,
    bound_output,
    has_architecture,
    interval_bounds,
    parallelize,
    parallelize_size_bound,
    special_to_standard,
)
from .sampling import ApproxConfig, build_R, decay_bound, theorem31_bound

__all__ = ["CheckRow", "ExperimentConfig", "CRITERIA", "run_criterion", "fit_slope"]


@dataclass(frozen=True)
class CheckRow:
    criterion: int
    cell: str
    measured: float
    bound: float
    status: str
    note: str = ""

    def csv(self) -> str:
        return f"{self.criterion},{self.cell},{self.measured:.17g},{self.bound:.17g},{self.status},{self.note}"


def _row(criterion, cell, measured, bound, ok, note=""):
    return CheckRow(criterion, cell, float(measured), float(bound), "PASS" if ok else "FAIL", note)


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameter ranges for the checks and sweeps. ``beta_offsets`` are added to alpha."""

    dims: tuple[int, ...] = (2, 3)
    alphas: tuple[float, ...] = (1.5, 2.0)
    beta_offsets: tuple[float, ...] = (1.0,)
    betas: tuple[float, ...] = ()
    ps: tuple[float, ...] = (1.0, 2.0, math.inf)
    m_values: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    eps_values: tuple[float, ...] = (0.2, 0.1)
    sweep_eps: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025, 0.0125)
    narrow_eps: tuple[tuple[int, float], ...] = ((2, 0.2), (3, 0.09), (4, 0.03))
    corpus: tuple[str, ...] = ("poly_tent", "sine_product", "bspline_bump")
    mc_nodes: int = 1_000_000
    seed: int = 42
    out_dir: str = "faber_relu_out"
    criteria: tuple[int, ...] = tuple(range(1, 11))

    def __post_init__(self):
        for a in self.alphas:
            if not 1 < a <= 2:
                raise ValueError(f"alpha must lie in (1, 2], got {a}")
            for b in self.beta_pairs(a):
                if not b > a:
                    raise ValueError(f"beta must exceed alpha, got beta={b}, alpha={a}")
        for p in self.ps:
            if p < 1:
                raise ValueError(f"p must be >= 1, got {p}")
        if any(e <= 0 for e in (*self.eps_values, *self.sweep_eps)):
            raise ValueError("eps values must be positive")
        if any(m < 0 for m in self.m_values):
            raise ValueError("m values must be >= 0")
        if any(c not in range(1, 11) for c in self.criteria):
            raise ValueError("criteria are numbered 1..10")

    def beta_pairs(self, alpha: float) -> tuple[float, ...]:
        return tuple(self.betas) if self.betas else tuple(alpha + o for o in self.beta_offsets)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        conv = {}
        for key, val in data.items():
            if key not in cls.__dataclass_fields__:
                raise ValueError(f"unknown config key {key!r}")
            if key == "ps":
                val = tuple(math.inf if str(v).lower() in ("inf", "infinity") else float(v) for v in val)
            elif key == "narrow_eps":
                val = tuple((int(d), float(e)) for d, e in val)
            elif isinstance(val, list):
                val = tuple(val)
            conv[key] = val
        return cls(**conv)


def fit_slope(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope and coefficient of determination."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum((y - pred) ** 2)) / ss_tot
    return float(coef[0]), r2


def _unit_ball(d: int, alpha: float, ids=("poly_tent", "sine_product", "bspline_bump")):
    out = []
    for name in ids:
        if name == "poly_tent":
            out.append(poly_tent(d))
        elif name == "sine_product":
            out.append(sine_product(d))
        elif name == "bspline_bump":
            out.append(bspline_bump(d, alpha))
    return out


def _pfmt(p: float) -> str:
    return "inf" if math.isinf(p) else f"{p:g}"


# ---------------------------------------------------------------------------
# 1. interpolation


def check_interpolation(cfg: ExperimentConfig) -> list[CheckRow]:
    rows = []
    for d in (1, 2, 3):
        for alpha in cfg.alphas:
            funcs = _unit_ball(d, alpha, cfg.corpus) + [truncated_series(d, alpha, 7, cfg.seed)]
            for beta in (alpha + 0.5, alpha + 1.0):
                ac = ApproxConfig(d, alpha, beta)
                for f in funcs:
                    worst = 0.0
                    for m in range(0, 7):
                        R = build_R(f.value, ac, m)
                        X = grid_points(enumerate_notched(d, beta, m)).points
                        worst = max(worst, float(np.max(np.abs(R.value(X) - f.value(X)))))
                    rows.append(_row(1, f"d={d} alpha={alpha:g} beta={beta:g} f={f.id}", worst, 1e-12,
                                     worst <= 1e-12))
    return rows


# ---------------------------------------------------------------------------
# 2. coefficient decay


def check_decay(cfg: ExperimentConfig, max_level: int = 8) -> list[CheckRow]:
    rows = []
    for d in (1, 2, 3, 4):
        levels = list(enumerate_smolyak(d, max_level))
        for alpha in cfg.alphas:
            for f in _unit_ball(d, alpha, cfg.corpus):
                if f.id != "bspline_bump" and alpha != max(cfg.alphas):
                    continue  # bound is tightest at the largest alpha in the range
                coef = faber_coefficients(f.value, levels)
                worst = 0.0
                for k, block in coef.items():
                    worst = max(worst, float(np.max(np.abs(block))) / decay_bound(d, alpha, sum(k)))
                rows.append(_row(2, f"d={d} alpha={alpha:g} f={f.id}", worst, 1.0, worst <= 1.0 + 1e-12,
                                 "max |lambda| / bound"))
    return rows


# ---------------------------------------------------------------------------
# 3. sampling error


def _grad_norms(G: Callable[[np.ndarray], np.ndarray], q: QuadratureSpec, d: int, ps) -> dict:
    """W^1_p norms of a gradient field for several p from one pass over the nodes."""
    sums = {p: [0.0, 0.0] for p in ps if not math.isinf(p)}
    peak, count = 0.0, 0
    for X in nodes(q, d):
        A = np.abs(G(X))
        count += len(X)
        peak = max(peak, float(np.max(A)))
        for p in sums:
            h = np.sum(A ** p, axis=1)
            sums[p][0] += float(np.sum(h))
            sums[p][1] += float(np.sum(h * h))
    out = {}
    for p in ps:
        if math.isinf(p):
            out[p] = (peak, 0.0)
            continue
        mean = sums[p][0] / count
        var = max(sums[p][1] / count - mean * mean, 0.0)
        val = mean ** (1.0 / p)
        se = 0.0 if q.scheme != "mc" or mean == 0 else val / (p * mean) * math.sqrt(var / count)
        out[p] = (val, se)
    return out


def _diff_expansion(f_exp: FaberExpansion, R: FaberExpansion) -> FaberExpansion:
    blocks = {k: np.array(v) for k, v in f_exp.coefficients.items()}
    for k, v in R.coefficients.items():
        blocks[k] = blocks.get(k, np.zeros_like(v)) - v
    return FaberExpansion(f_exp.d, {k: v for k, v in blocks.items() if np.any(v)})


def check_sampling_error(cfg: ExperimentConfig, rate_dims=(2,), rate_mt: dict | None = None) -> list[CheckRow]:
    rows = []
    rate_mt = rate_mt or {1.5: 16, 2.0: 12}
    for d in cfg.dims:
        for alpha in cfg.alphas:
            beta = alpha + 1.0
            ac = ApproxConfig(d, alpha, beta)
            for f in _unit_ball(d, alpha, cfg.corpus):
                for m in cfg.m_values:
                    R = build_R(f.value, ac, m)
                    q = default_quadrature(d, m) if d <= 2 else QuadratureSpec("mc", N=cfg.mc_nodes, seed=cfg.seed)
                    norms = _grad_norms(lambda X: f.grad(X) - R.grad(X), q, d, cfg.ps)
                    for p in cfg.ps:
                        bound = theorem31_bound(ApproxConfig(d, alpha, beta, p), m)
                        val, se = norms[p]
                        slack = 0.01 * bound if q.scheme == "midpoint" else 3 * se
                        rows.append(_row(3, f"d={d} alpha={alpha:g} p={_pfmt(p)} m={m} f={f.id}", val, bound,
                                         val <= bound + slack, q.scheme))
            if d not in rate_dims:
                continue
            # decay rate on a random series whose coefficients saturate the decay bound
            mt = rate_mt.get(alpha, max(cfg.m_values) + 8)
            t = truncated_series(d, alpha, mt, cfg.seed)
            errs = {p: [] for p in cfg.ps}
            ms = list(cfg.m_values)
            for m in ms:
                R = build_R(t.value, ac, m)
                diff = _diff_expansion(t.expansion, R)
                q = QuadratureSpec("midpoint", n=2 ** (m + 3))
                norms = _grad_norms(diff.grad, q, d, cfg.ps)
                for p in cfg.ps:
                    errs[p].append(norms[p][0])
                    bound = theorem31_bound(ApproxConfig(d, alpha, beta, p), m)
                    rows.append(_row(3, f"d={d} alpha={alpha:g} p={_pfmt(p)} m={m} f=truncated_series",
                                     norms[p][0], bound, norms[p][0] <= 1.01 * bound, "midpoint"))
            for p in cfg.ps:
                slope, _ = fit_slope(ms, np.log2(errs[p]))
                rows.append(_row(3, f"rate d={d} alpha={alpha:g} p={_pfmt(p)}", slope, -(alpha - 1),
                                 abs(slope + (alpha - 1)) <= 0.3, "fitted log2 error per level"))
    return rows


# ---------------------------------------------------------------------------
# 4. cardinalities


def check_cardinality(cfg: ExperimentConfig) -> list[CheckRow]:
    rows = []
    worst_D = worst_G = 0.0
    ok = True
    for d in range(1, 7):
        for beta in (1.5, 2, 3):
            for m in range(0, 11):
                S = enumerate_notched(d, beta, m)
                rD = cardinality_D(S) / cardinality_D_bound(d, beta, m)
                rG = grid_cardinality(S) / grid_cardinality_bound(d, beta, m)
                worst_D, worst_G = max(worst_D, rD), max(worst_G, rG)
                ok &= rD <= 1 and rG <= 1
    rows.append(_row(4, "term count d<=6 m<=10 beta in {1.5,2,3}", worst_D, 1.0, worst_D <= 1, "max ratio"))
    rows.append(_row(4, "grid size d<=6 m<=10 beta in {1.5,2,3}", worst_G, 1.0, worst_G <= 1, "max ratio"))
    n33 = cardinality_D(enumerate_notched(2, 2, 3))
    rows.append(_row(4, "term count d=2 beta=2 m=3", n33, 33, n33 == 33))
    worst = 0.0
    for d in range(1, 7):
        for ell in range(0, 13):
            for p in (1.0, 2.0, math.inf):
                exact, bound = exp_sum_check(d, ell, p)
                worst = max(worst, exact / bound)
    rows.append(_row(4, "exponential sum d<=6 l<=12", worst, 1.0, worst <= 1.0, "max ratio"))
    return rows


# ---------------------------------------------------------------------------
# 5. product networks


def check_product_nets(cfg: ExperimentConfig, n_points: int = 100_000) -> list[CheckRow]:
    rows = []
    rng = np.random.default_rng(cfg.seed)
    ratios = []
    for d in (2, 3, 4, 6):
        for delta in (0.1, 0.01, 0.001):
            net = build_product_net(d, delta)
            X = rng.random((n_points, d))
            v, g = net.value_and_grad(X)
            prod = np.prod(X, axis=1)
            gp = np.stack([np.prod(np.delete(X, i, axis=1), axis=1) for i in range(d)], axis=1)
            ev, eg = float(np.max(np.abs(v - prod))), float(np.max(np.abs(g - gp)))
            Z = X[:10_000].copy()
            Z[np.arange(len(Z)), rng.integers(0, d, len(Z))] = 0.0
            ez = float(np.max(np.abs(net.value(Z))))
            W = net.stats().W
            ratios.append(W / (d * math.log2(d / delta)))
            cell = f"d={d} delta={delta:g}"
            rows.append(_row(5, cell + " value", ev, delta, ev <= delta))
            rows.append(_row(5, cell + " gradient", eg, delta, eg <= delta))
            rows.append(_row(5, cell + " zero input", ez, 1e-15, ez <= 1e-15))
    spread = max(ratios) / min(ratios)
    rows.append(_row(5, "W/(d log2(d/delta)) max/min", spread, 4.0, spread <= 4.0,
                     f"C in [{min(ratios):.4g}, {max(ratios):.4g}]"))
    return rows


# ---------------------------------------------------------------------------
# 6. hat networks


def _support_samples(k, s, rng, n):
    lo = np.array([si / 2.0 ** ki for ki, si in zip(k, s)])
    w = np.array([2.0 ** -ki for ki in k])
    return lo + w * rng.random((n, len(k)))


def check_hat_nets(cfg: ExperimentConfig, per_cell: int = 20, n_points: int = 5_000) -> list[CheckRow]:
    rows = []
    rng = np.random.default_rng(cfg.seed)
    for d in (2, 3, 4):
        for delta in (0.1, 0.01):
            worst_v = worst_g = 0.0
            support_ok = count_ok = True
            prod = build_product_net(d, delta)
            Wp, Lp = prod.stats().W, prod.stats().L
            for _ in range(per_cell):
                k = tuple(int(v) for v in rng.integers(0, 6, d))
                s = tuple(int(rng.integers(0, 2 ** ki)) for ki in k)
                net = build_hat_net(k, s, delta)
                X = _support_samples(k, s, rng, n_points)
                v, g = net.value_and_grad(X)
                worst_v = max(worst_v, float(np.max(np.abs(v - tensor_hat_eval(k, s, X)))))
                scale = np.ldexp(1.0, np.array(k) + 1)
                worst_g = max(worst_g, float(np.max(np.abs(g - tensor_hat_grad(k, s, X)) / scale)))
                Y = rng.random((n_points, d))
                outside = tensor_hat_eval(k, s, Y) == 0
                support_ok &= bool(np.all(net.value(Y[outside]) == 0.0))
                st = net.stats()
                count_ok &= st.W <= Wp + 7 * d and st.L == Lp + 2
            cell = f"d={d} delta={delta:g}"
            rows.append(_row(6, cell + " value", worst_v, delta, worst_v <= delta))
            rows.append(_row(6, cell + " gradient/2^(k_j+1)", worst_g, delta, worst_g <= delta))
            rows.append(_row(6, cell + " support", 0.0 if support_ok else 1.0, 0.0, support_ok))
            rows.append(_row(6, cell + " size/depth recount", 0.0 if count_ok else 1.0, 0.0, count_ok))
    return rows


# ---------------------------------------------------------------------------
# 7. end-to-end compilation


def check_end_to_end(cfg: ExperimentConfig) -> list[CheckRow]:
    rows = []
    d, alpha, beta, p = 2, 2.0, 3.0, 2.0
    ac = ApproxConfig(d, alpha, beta, p)
    for eps in cfg.eps_values:
        try:
            pl = plan(ac, eps)
        except EpsilonTooLarge as exc:
            rows.append(CheckRow(7, f"eps={eps:g}", eps, exc.eps0, "SKIP", "eps >= eps0"))
            continue
        f = poly_tent(d)
        net, _ = compile_network(f.value, ac, eps)
        R = build_R(f.value, ac, pl.m)
        q = QuadratureSpec("midpoint", n=2 ** (pl.m + 2))
        e_total = w1p_error(f, net, q, p)
        e_R = w1p_error(f, R, q, p)
        e_N = w1p_error(R, net, q, p)
        cell = f"eps={eps:g} m={pl.m}"
        rows.append(_row(7, cell + " ||f-N||", e_total, eps, e_total <= eps))
        rows.append(_row(7, cell + " ||f-R||", e_R, eps / 2, e_R <= eps / 2))
        rows.append(_row(7, cell + " ||R-N||", e_N, eps / 2, e_N <= eps / 2))
        other, _ = compile_network(sine_product(d).value, ac, eps)
        same = architecture_key(net) == architecture_key(other)
        rows.append(_row(7, cell + " architecture poly_tent==sine_product", 0.0 if same else 1.0, 0.0, same))
        bump, _ = compile_network(bspline_bump(d, alpha).value, ac, eps)
        inside = has_architecture(bump, net)
        rows.append(_row(7, cell + " bspline_bump within architecture", 0.0 if inside else 1.0, 0.0, inside))
    return rows


# ---------------------------------------------------------------------------
# 8. scaling


def sweep_stats(d: int, alpha: float, beta: float, p: float, eps_values, narrow: bool = False):
    """Compile ``poly_tent`` over ``eps_values`` and collect plan and network statistics."""
    ac = ApproxConfig(d, alpha, beta, p)
    out = []
    for eps in eps_values:
        pl = plan(ac, eps)
        builder = compile_narrow if narrow else compile_network
        net, _ = builder(poly_tent(d).value, ac, eps)
        st = net.stats()
        out.append({"eps": eps, "m": pl.m, "delta": pl.delta, "W": st.W, "L": st.L, "N_w": st.N_w,
                    "terms": cardinality_D(enumerate_notched(d, beta, pl.m)), "B": pl.B, "eps0": pl.eps0})
    return out


def check_scaling(cfg: ExperimentConfig) -> list[CheckRow]:
    alpha = 2.0
    stats = sweep_stats(2, alpha, alpha + 1, 2.0, cfg.sweep_eps)
    x = [math.log2(1 / s["eps"]) for s in stats]
    slope, _ = fit_slope(x, [math.log2(s["W"]) for s in stats])
    target = 1 / (alpha - 1)
    _, r2 = fit_slope(x, [s["L"] for s in stats])
    rows = [_row(8, "slope log2 W vs log2(1/eps)", slope, target, abs(slope - target) <= 0.5,
                 f"W={[s['W'] for s in stats]}"),
            _row(8, "R^2 of L vs log2(1/eps)", r2, 0.95, r2 >= 0.95, f"L={[s['L'] for s in stats]}")]
    return rows


# ---------------------------------------------------------------------------
# 9. narrow networks


def check_narrow(cfg: ExperimentConfig, n_points: int = 10_000, K4_cap: float = 14.0) -> list[CheckRow]:
    rows = []
    rng = np.random.default_rng(cfg.seed)
    widths = []
    for d, eps in cfg.narrow_eps:
        ac = ApproxConfig(d, 2.0, 3.0, 2.0)
        f = poly_tent(d)
        wide, pl = compile_network(f.value, ac, eps)
        narrow, _ = compile_narrow(f.value, ac, eps)
        X = rng.random((n_points, d))
        a, b = narrow.value(X), wide.value(X)
        scale = max(float(np.max(np.abs(b))), np.finfo(float).tiny)
        rel = float(np.max(np.abs(a - b))) / scale
        rows.append(_row(9, f"d={d} eps={eps:g} m={pl.m} output", rel, 1e-9, rel <= 1e-9, "max |diff| / max |out|"))
        ratio = narrow.stats().N_w / d
        widths.append(ratio)
        rows.append(_row(9, f"d={d} eps={eps:g} N_w/d", ratio, K4_cap, ratio <= K4_cap,
                         f"L={narrow.stats().L} wide L={wide.stats().L}"))
    rows.append(_row(9, "fitted K4 = max N_w/d", max(widths), K4_cap, max(widths) <= K4_cap))
    return rows


# ---------------------------------------------------------------------------
# 10. combinators


def random_network(rng: np.random.Generator, d: int, depth: int, max_width: int = 5, density: float = 0.6) -> ReluNetwork:
    dims = [d] + [int(rng.integers(1, max_width + 1)) for _ in range(depth - 1)] + [1]
    layers = []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        mask = rng.random((n_out, n_in)) < density
        mask[rng.integers(0, n_out), rng.integers(0, n_in)] = True
        W = np.where(mask, rng.normal(size=(n_out, n_in)), 0.0)
        b = np.where(rng.random(n_out) < 0.7, rng.normal(size=n_out), 0.0)
        layers.append(Layer.from_dense(W, b))
    return ReluNetwork(tuple(layers))


def check_combinators(cfg: ExperimentConfig, trials: int = 100, n_points: int = 10_000) -> list[CheckRow]:
    rng = np.random.default_rng(cfg.seed)
    worst_par = worst_std = 0.0
    size_ok = shape_ok = True
    for _ in range(trials):
        d = int(rng.integers(1, 4))
        nets = [random_network(rng, d, int(rng.integers(2, 6))) for _ in range(int(rng.integers(1, 5)))]
        lam = rng.normal(size=len(nets))
        X = rng.random((n_points, d))
        bounds = [bound_output(n) for n in nets]
        par = parallelize(nets, lam)
        ref = sum(l * n.value(X) for l, n in zip(lam, nets))
        tol = 1 + float(np.sum(np.abs(lam) * np.array(bounds)))
        worst_par = max(worst_par, float(np.max(np.abs(par.value(X) - ref))) / tol)
        size_ok &= par.stats().W <= parallelize_size_bound(nets)
        special = chain_special(nets, lam, d)
        std = special_to_standard(special)
        a, b = std.value(X), special.value(X)
        worst_std = max(worst_std, float(np.max(np.abs(a - b))) / max(1.0, float(np.max(np.abs(b)))))
        ss, sp = std.stats(), special.stats()
        shape_ok &= ss.N_w == sp.N_w and ss.L == sp.L
        worst_std = max(worst_std, float(np.max(np.abs(b - ref))) / tol)
    return [
        _row(10, f"parallelize output ({trials} trials)", worst_par, 1e-9, worst_par <= 1e-9, "scaled error"),
        _row(10, f"parallelize size accounting ({trials} trials)", 0.0 if size_ok else 1.0, 0.0, size_ok),
        _row(10, f"special_to_standard output ({trials} trials)", worst_std, 1e-9, worst_std <= 1e-9,
             "relative error"),
        _row(10, "special_to_standard width and depth", 0.0 if shape_ok else 1.0, 0.0, shape_ok),
    ]


CRITERIA: dict[int, tuple[str, Callable[[ExperimentConfig], list[CheckRow]]]] = {
    1: ("interpolation identity", check_interpolation),
    2: ("coefficient decay", check_decay),
    3: ("sampling error bound and rate", check_sampling_error),
    4: ("cardinality bounds", check_cardinality),
    5: ("product network contracts", check_product_nets),
    6: ("hat network contracts", check_hat_nets),
    7: ("end-to-end compilation", check_end_to_end),
    8: ("scaling laws", check_scaling),
    9: ("narrow network", check_narrow),
    10: ("combinator exactness", check_combinators),
}


def run_criterion(number: int, cfg: ExperimentConfig | None = None) -> tuple[str, list[CheckRow]]:
    cfg = cfg or ExperimentConfig()
    name, fn = CRITERIA[number]
    rows = fn(cfg)
    if any(r.status == "FAIL" for r in rows):
        status = "FAIL"
    elif rows and all(r.status == "SKIP" for r in rows):
        status = "SKIP"
    else:
        status = "PASS"
    return status, rows
