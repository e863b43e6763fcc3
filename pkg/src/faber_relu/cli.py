"""Command-line interface.

Exit codes: 0 success (all checks pass), 1 a measured bound is violated,
2 invalid parameters.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .constructors import EpsilonTooLarge, compile_narrow, compile_network, plan
from .corpus import CORPUS, get_function
from .faber import FaberExpansion
from .index import enumerate_index_set, grid_points, grid_cardinality, cardinality_D
from .metrics import QuadratureSpec, default_quadrature, w1p_error
from .relunet import ReluNetwork
from .sampling import ApproxConfig, build_R, theorem31_bound
from .verify import CRITERIA, ExperimentConfig, fit_slope, run_criterion

EXIT_OK, EXIT_VIOLATION, EXIT_PARAM = 0, 1, 2


def _g(x: float) -> str:
    return f"{x:.17g}"


def _p(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def threads() -> int:
    try:
        return max(1, int(os.environ.get("FABER_RELU_THREADS", "1")))
    except ValueError:
        return 1


def _write(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_grid(args) -> int:
    S = enumerate_index_set(args.kind, args.dim, args.m, args.beta)
    text = S.to_text()
    if args.points:
        text = grid_points(S).to_text()
    _write(args.out, text)
    print(f"levels={len(S)} terms={cardinality_D(S)} grid={grid_cardinality(S)}",
          file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK


def _config(args) -> ApproxConfig:
    return ApproxConfig(args.dim, args.alpha, args.beta, _p(args.p), getattr(args, "eps", None))


def cmd_sample(args) -> int:
    cfg = _config(args)
    f = get_function(args.func, args.dim, args.alpha)
    R = build_R(f.value, cfg, args.m, args.kind)
    if args.prune_tol is not None:
        R = R.prune(args.prune_tol)
    S = enumerate_index_set(args.kind, args.dim, args.m, args.beta)
    if args.out:
        Path(args.out).write_text(R.to_text())
    print(f"terms={R.n_terms} grid={grid_cardinality(S)} bound={_g(theorem31_bound(cfg, args.m))}")
    return EXIT_OK


def cmd_compile(args) -> int:
    cfg = _config(args)
    f = get_function(args.func, args.dim, args.alpha)
    builder = compile_narrow if args.narrow else compile_network
    net, pl = builder(f.value, cfg, args.eps)
    st = net.stats()
    if args.out:
        Path(args.out).write_text(net.to_text())
    terms = cardinality_D(enumerate_index_set("notched", args.dim, pl.m, args.beta))
    print(f"m={pl.m} delta={_g(pl.delta)} terms={terms} W={st.W} L={st.L} Nw={st.N_w} "
          f"eps0={_g(pl.eps0)} B={_g(pl.B)}")
    return EXIT_OK


def _load_operand(spec: str, dim: int | None, alpha: float | None):
    kind, _, rest = spec.partition(":")
    if kind == "func":
        if dim is None:
            raise ValueError("--dim is required for func: operands")
        return get_function(rest, dim, alpha)
    if kind == "expansion":
        return FaberExpansion.from_text(Path(rest).read_text())
    if kind == "net":
        return ReluNetwork.from_text(Path(rest).read_text())
    raise ValueError(f"operand must be func:<id>, expansion:<file> or net:<file>, got {spec!r}")


def cmd_measure(args) -> int:
    lhs = _load_operand(args.lhs, args.dim, args.alpha)
    rhs = _load_operand(args.rhs, args.dim, args.alpha)
    if lhs.d != rhs.d:
        raise ValueError("operands have different dimensions")
    if args.scheme == "midpoint":
        q = QuadratureSpec("midpoint", n=args.n)
    else:
        q = QuadratureSpec("mc", N=args.N, seed=args.seed)
    p = _p(args.p)
    t0 = time.perf_counter()
    value, se = w1p_error(lhs, rhs, q, p, lhs.d, with_se=True)
    ms = (time.perf_counter() - t0) * 1000
    print("lhs,rhs,p,scheme,value,std_error,runtime_ms")
    print(f"{args.lhs},{args.rhs},{args.p},{args.scheme},{_g(value)},{_g(se)},{ms:.1f}")
    return EXIT_OK


def cmd_corpus(args) -> int:
    print("id,d_range,alpha_range,certification")
    for name, (_, drange, arange, cert) in CORPUS.items():
        print(f"{name},{drange},{arange},{cert}")
    return EXIT_OK


def _load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    text = Path(path).read_text()
    return ExperimentConfig.from_dict(json.loads(text))


def cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    if args.criteria:
        cfg = ExperimentConfig.from_dict({**_as_dict(cfg), "criteria": [int(c) for c in args.criteria.split(",")]})
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["criterion,cell,measured,bound,status,note"]
    failed = False
    for number in cfg.criteria:
        status, rows = run_criterion(number, cfg)
        failed |= status == "FAIL"
        lines.extend(r.csv() for r in rows)
        print(f"{status} criterion {number}: {CRITERIA[number][0]}")
        for r in rows:
            if r.status == "SKIP":
                print(f"  SKIP {r.cell} (eps0={_g(r.bound)})")
    (out / "verify.csv").write_text("\n".join(lines) + "\n")
    return EXIT_VIOLATION if failed else EXIT_OK


def _as_dict(cfg: ExperimentConfig) -> dict:
    d = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
    d["ps"] = ["inf" if math.isinf(p) else p for p in d["ps"]]
    return d


SWEEP_COLUMNS = ["d", "alpha", "beta", "p", "eps", "status", "m", "delta", "terms", "W", "L", "Nw",
                 "err_W1p", "bound_thm31", "B", "K2", "K3", "K4"]


def sweep_cell(cell: tuple) -> dict:
    """Compile ``poly_tent`` for one parameter cell and collect statistics."""
    d, alpha, beta, p, eps, measure_err = cell
    cfg = ApproxConfig(d, alpha, beta, p)
    row = {"d": d, "alpha": alpha, "beta": beta, "p": p, "eps": eps}
    try:
        pl = plan(cfg, eps)
    except EpsilonTooLarge as exc:
        row.update(status="SKIP", B=math.nan, delta=math.nan, bound_thm31=math.nan)
        row["note_eps0"] = exc.eps0
        return row
    f = get_function("poly_tent", d)
    net, _ = compile_network(f.value, cfg, eps)
    st = net.stats()
    err = math.nan
    if measure_err and d <= 2:
        err = w1p_error(f, net, default_quadrature(d, pl.m), p)
    log_eps = math.log2(1 / eps)
    row.update(status="OK", m=pl.m, delta=pl.delta,
               terms=cardinality_D(enumerate_index_set("notched", d, pl.m, beta)),
               W=st.W, L=st.L, Nw=st.N_w, err_W1p=err, bound_thm31=theorem31_bound(cfg, pl.m), B=pl.B,
               K2=st.L / (math.log2(d) * log_eps) if d > 1 and log_eps > 0 else math.nan,
               K3=st.W / (pl.B ** -d * eps ** (-1 / (alpha - 1)) * log_eps) if log_eps > 0 else math.nan,
               K4=st.N_w / d)
    return row


def _csv_value(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else ("" if math.isnan(v) else _g(v))
    return "" if v is None else str(v)


def report_sweep(cfg: ExperimentConfig, out_dir: Path, measure_err: bool = False) -> tuple[Path, list[dict]]:
    cells = sorted({(d, a, b, p, e, measure_err) for d in cfg.dims for a in cfg.alphas
                    for b in cfg.beta_pairs(a) for p in cfg.ps for e in cfg.sweep_eps})
    n = threads()
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(sweep_cell, cells))
    else:
        rows = [sweep_cell(c) for c in cells]
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "sweep.csv"
    lines = [",".join(SWEEP_COLUMNS)]
    for r in rows:
        lines.append(",".join(_csv_value(r.get(c)) for c in SWEEP_COLUMNS))
    path.write_text("\n".join(lines) + "\n")
    fits = ["d,alpha,beta,p,slope_log2W,R2_L,K2_max,K3_max,K4_max"]
    groups = {}
    for r in rows:
        if r["status"] == "OK":
            groups.setdefault((r["d"], r["alpha"], r["beta"], r["p"]), []).append(r)
    for key, group in sorted(groups.items()):
        if len(group) < 2:
            continue
        x = [math.log2(1 / r["eps"]) for r in group]
        slope, _ = fit_slope(x, [math.log2(r["W"]) for r in group])
        _, r2 = fit_slope(x, [r["L"] for r in group])
        fits.append(",".join(_csv_value(v) for v in (*key, slope, r2, max(r["K2"] for r in group),
                                                    max(r["K3"] for r in group), max(r["K4"] for r in group))))
    (out_dir / "fits.csv").write_text("\n".join(fits) + "\n")
    return path, rows


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    path, rows = report_sweep(cfg, Path(args.out or cfg.out_dir), args.measure)
    violated = any(r["status"] == "OK" and not math.isnan(r["err_W1p"]) and r["err_W1p"] > r["eps"] for r in rows)
    print(f"wrote {path} ({len(rows)} cells)")
    return EXIT_VIOLATION if violated else EXIT_OK


# ---------------------------------------------------------------------------


def _add_cfg(p, eps=False):
    p.add_argument("--func", default="poly_tent", help="corpus id, optionally name:key=value,...")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--beta", type=float, default=3.0)
    p.add_argument("--p", default="2")
    if eps:
        p.add_argument("--eps", type=float, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="faber-relu", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grid", help="enumerate an index set or its sparse grid")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--kind", choices=["notched", "smolyak", "full"], default="notched")
    p.add_argument("--points", action="store_true", help="write grid points instead of levels")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_grid)

    p = sub.add_parser("sample", help="build the sparse-grid sampling operator")
    _add_cfg(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--kind", choices=["notched", "smolyak", "full"], default="notched")
    p.add_argument("--prune-tol", type=float)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("compile", help="compile a ReLU network for a target accuracy")
    _add_cfg(p, eps=True)
    p.add_argument("--narrow", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("measure", help="W^1_p distance between two operands")
    p.add_argument("--lhs", required=True)
    p.add_argument("--rhs", required=True)
    p.add_argument("--dim", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--p", default="2")
    p.add_argument("--scheme", choices=["midpoint", "mc"], default="midpoint")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--N", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(fn=cmd_measure)

    p = sub.add_parser("corpus", help="list corpus functions")
    p.add_argument("action", choices=["list"])
    p.set_defaults(fn=cmd_corpus)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--criteria", help="comma-separated criterion numbers")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("sweep", help="compile over a parameter sweep and write CSV")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--measure", action="store_true", help="also measure the W^1_p error (d <= 2)")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except EpsilonTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
