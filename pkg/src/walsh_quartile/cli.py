"""Command line entry point: ``python3 -m walsh_quartile <command> ...``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from .decomposition import (SelectionError, SizePreconditionError, counting_bounds,
                            exceptional_set, full_decomposition, select_trees)
from .dyadic import DyadicRational
from .form import FormSpec, lambda_form
from .harness import (ExperimentConfig, dump, run_identity_suite, run_restricted_experiment,
                      run_uniformity_sweep, sweep_plot_csv)
from .stepfunction import DyadicSet, StepFunction
from .tiles import Bitile, GeometryError, TileUniverse, rect_from_json


def _load(path: str):
    with open(path) as fh:
        return json.load(fh)


def _bitiles(path: str) -> set[Bitile]:
    obj = _load(path)
    if isinstance(obj, dict):
        obj = obj["bitiles"]
    out = set()
    for q in obj:
        P = rect_from_json(q)
        if not isinstance(P, Bitile):
            raise GeometryError(f"{q} is not a bitile")
        out.add(P)
    return out


def _function(path: str) -> StepFunction:
    return StepFunction.from_json(_load(path))


def _coefficients(path: str) -> dict:
    obj = _load(path)
    return {rect_from_json(e["bitile"]): DyadicRational.from_json(e["c"]) for e in obj}


def _int_list(text: str) -> list[int]:
    """``"2..10"``, ``"2,4,6"`` or ``"3"``."""
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in text.split(",")]


def _universe_arg(text: str, L: int = 2) -> TileUniverse:
    if text.endswith(".json") or os.path.exists(text):
        return TileUniverse.from_json(_load(text))
    vals = _int_list(text)
    N, M = vals[0], vals[1]
    return TileUniverse(N, M, L, vals[2] if len(vals) > 2 else None)


def _config(args) -> ExperimentConfig:
    base = _load(args.config) if args.config else {}
    cfg = ExperimentConfig.from_json(base) if base else ExperimentConfig()
    if args.universe:
        vals = _int_list(args.universe)
        cfg.N, cfg.M = vals[0], vals[1]
        cfg.r = vals[2] if len(vals) > 2 else None
    if args.L:
        cfg.L_values = _int_list(args.L)
    if args.trials is not None:
        cfg.trials = args.trials
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out = args.out
    return cfg


def _emit(obj, out: str | None):
    text = dump(obj, out)
    if not out:
        print(text)


def cmd_eval_form(args) -> int:
    U = _universe_arg(args.universe, args.L if args.L is not None else 2)
    if args.L is not None:
        U = U.with_L(args.L)
    spec = FormSpec(U, _bitiles(args.tiles) if args.tiles else None,
                    _coefficients(args.coeffs) if args.coeffs else None)
    fs = [_function(p) for p in (args.f1, args.f2, args.f3)]
    value, terms = lambda_form(spec, *fs, method=args.method, with_terms=True)
    _emit({"value": value.to_json(), "value_str": str(value),
           "per_bitile_terms": [{"bitile": P.to_json(), "term": t.to_json()}
                                for P, t in sorted(terms.items(), key=lambda kv: kv[0].to_json())]},
          args.out)
    return 0


def cmd_select_trees(args) -> int:
    P = _bitiles(args.input)
    f = _function(args.f)
    U = _universe_arg(args.universe, args.L) if args.universe else None
    try:
        sel = select_trees(P, f, args.k, args.L, universe=U, tie_break=args.tie_break,
                           check_precondition=not args.no_precondition)
    except SizePreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return 2
    except SelectionError as exc:
        print(f"invariant failed: {exc}", file=sys.stderr)
        return 1
    bounds = counting_bounds(sel.forest, f, args.k, f.support)
    out = sel.to_json()
    out["counting"] = {"sum_IT": bounds["sum_IT"].to_json(), "bound": bounds["bound"].to_json(),
                       "global_ok": bool(bounds["global_ok"]), "local_ok": bool(bounds["local_ok"])}
    _emit(out, args.out)
    return 0 if bounds["global_ok"] and bounds["local_ok"] else 1


def cmd_decompose(args) -> int:
    P = _bitiles(args.input)
    f = _function(args.f)
    U = _universe_arg(args.universe, args.L) if args.universe else None
    try:
        trace = full_decomposition(P, f, args.L, args.k_max, universe=U, tie_break=args.tie_break)
    except SelectionError as exc:
        print(f"invariant failed: {exc}", file=sys.stderr)
        return 1
    out = trace.to_json()
    out["partition_ok"] = trace.check_partition()
    _emit(out, args.out)
    return 0 if out["partition_ok"] else 1


def _set_entry(text: str):
    """``path.json:q:beta`` with rational ``q`` and ``beta``."""
    path, q, beta = text.rsplit(":", 2)
    return DyadicSet.from_json(_load(path)), Fraction(q), Fraction(beta)


def cmd_exceptional_set(args) -> int:
    entries = [_set_entry(t) for t in args.set]
    F = exceptional_set(entries, Fraction(args.threshold))
    out = F.to_json()
    out["measure"] = str(F.measure())
    _emit(out, args.out)
    return 0


def cmd_verify(args) -> int:
    cfg = _config(args)
    report = run_identity_suite(cfg, fault=args.fault)
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']} ({c['instances']} instances)",
              file=sys.stderr)
    _emit(report, cfg.out)
    return 0 if report["passed"] else 1


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.p:
        cfg.p = tuple(Fraction(v) for v in args.p.split(","))
        cfg.p = tuple(int(v) if v.denominator == 1 else str(v) for v in cfg.p)
        cfg.__post_init__()
    report = run_uniformity_sweep(cfg, mode=args.mode)
    if args.emit_plot_data:
        with open(args.emit_plot_data, "w") as fh:
            fh.write(sweep_plot_csv(report))
    for L, m in report["max_ratio"].items():
        print(f"L={L} max_ratio={m:.6g}", file=sys.stderr)
    print(f"growth_factor={report['growth_factor']:.6g}", file=sys.stderr)
    _emit(report, cfg.out)
    return 0


def cmd_restricted(args) -> int:
    cfg = _config(args)
    cfg.alpha = tuple(args.alpha.split(","))
    cfg.p = None
    cfg.eps = args.eps
    cfg.__post_init__()
    report = run_restricted_experiment(cfg)
    _emit(report, cfg.out)
    return 0 if report["all_major_ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="walsh_quartile", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval-form", help="exact value of the quartile form")
    p.add_argument("--universe", required=True, help="universe JSON or N,M[,r]")
    p.add_argument("--tiles", help="bitile list JSON (default: whole universe)")
    p.add_argument("--f1", required=True)
    p.add_argument("--f2", required=True)
    p.add_argument("--f3", required=True)
    p.add_argument("--coeffs")
    p.add_argument("--L", type=int)
    p.add_argument("--method", choices=["fast", "cellwise"], default="fast")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_form)

    for name, func in (("select-trees", cmd_select_trees), ("decompose", cmd_decompose)):
        p = sub.add_parser(name)
        p.add_argument("--input", required=True, help="bitile list JSON")
        p.add_argument("--f", required=True, help="step function JSON")
        p.add_argument("--L", type=int, required=True)
        p.add_argument("--universe", help="universe JSON or N,M[,r]")
        p.add_argument("--tie-break", choices=["default", "alternate"], default="default")
        p.add_argument("--out")
        if name == "select-trees":
            p.add_argument("--k", type=int, required=True)
            p.add_argument("--no-precondition", action="store_true")
        else:
            p.add_argument("--k-max", type=int, required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("exceptional-set")
    p.add_argument("--set", action="append", required=True, metavar="E.json:q:beta")
    p.add_argument("--threshold", default="10", help="log2 of the level (default 10)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_exceptional_set)

    for name, func in (("verify", cmd_verify), ("sweep-uniform", cmd_sweep),
                       ("restricted", cmd_restricted)):
        p = sub.add_parser(name)
        p.add_argument("--config", help="ExperimentConfig JSON")
        p.add_argument("--seed", type=int)
        p.add_argument("--universe", help="N,M[,r]")
        p.add_argument("--L", help="e.g. 2..10 or 2,4,6")
        p.add_argument("--trials", type=int)
        p.add_argument("--out")
        if name == "verify":
            p.add_argument("--fault", choices=["packet"])
        if name == "sweep-uniform":
            p.add_argument("--p", help="exponents p1,p2,p3")
            p.add_argument("--mode", choices=["sign", "signed-dyadic", "indicator"],
                           default="sign")
            p.add_argument("--emit-plot-data", metavar="CSV")
        if name == "restricted":
            p.add_argument("--alpha", required=True, help="a1,a2,a3 summing to 1")
            p.add_argument("--eps", default="1/12")
        p.set_defaults(func=func)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GeometryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
