"""Command-line experiment runner.

Every subcommand loads or generates a graph, runs its pipeline once per trial
(trial ``i`` uses seed ``base + i``) and writes one JSON record per trial plus
an optional aggregate CSV row. Reports hold no timestamps or timings, so a
rerun with the same flags produces byte-identical output.

Exit codes: 0 success, 1 usage error, 2 pipeline failure in some trial,
3 a trial finished but breached its correctness threshold.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Callable

import numpy as np

from . import apsp as apsp_mod
from . import cuts as cuts_mod
from .broadcast import PLACEMENTS, basic_broadcast, k_broadcast, place_messages, theory_references
from .graph import (
    GENERATORS,
    MAX_CUT_ENUM_N,
    Graph,
    GraphError,
    all_cut_values,
    exact_diameter,
    exact_edge_connectivity,
    generate,
    min_cut,
    oracle_apsp,
    read_graph,
    with_random_ids,
    with_random_weights,
    write_graph,
)
from .packing import (
    DEFAULT_BOUND_CONST,
    DEFAULT_C,
    build_trees,
    diameter_bound,
    exponential_search,
    partition,
    single_tree,
    verify_packing,
)
from .spanner import auto_stretch, estimate_weighted_apsp

EXIT_OK, EXIT_USAGE, EXIT_PIPELINE, EXIT_BREACH = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- graph source


def parse_gen_spec(spec: str) -> tuple[str, dict[str, int]]:
    """``kind:key=val,key=val`` -> (kind, params)."""
    kind, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise UsageError(f"generator parameter {item!r} is not key=value")
        try:
            params[key.strip()] = int(val)
        except ValueError:
            raise UsageError(f"generator parameter {key!r} must be an integer") from None
    if kind not in GENERATORS:
        raise UsageError(f"unknown generator {kind!r}; choose from {', '.join(sorted(GENERATORS))}")
    return kind, params


def load_graph(args) -> Graph:
    if bool(args.graph) == bool(args.gen):
        raise UsageError("give exactly one of --graph FILE or --gen KIND:params")
    try:
        if args.graph:
            g = read_graph(args.graph)
        else:
            kind, params = parse_gen_spec(args.gen)
            g = generate(kind, args.graph_seed, **params)
    except OSError as exc:
        raise UsageError(f"cannot read graph: {exc}") from None
    except GraphError as exc:
        raise UsageError(str(exc)) from None
    if getattr(args, "random_ids", False):
        g = with_random_ids(g, args.graph_seed)
    return g


def _packing(g: Graph, mode: str, C: float, bound_const: float, seed: int):
    """Returns (packing, lambda used for references or None)."""
    if mode == "single":
        return single_tree(g, seed), None
    if mode == "oracle":
        lam = exact_edge_connectivity(g)
        return build_trees(g, partition(g, lam, C, seed), seed), lam
    found = exponential_search(g, C, bound_const, seed)
    return build_trees(g, found.partition, seed), None


# ---------------------------------------------------------------- subcommands
# each returns (record, ok) for one trial


def cmd_gen(args, g: Graph, seed: int):
    if args.weight_max:
        g = with_random_weights(g, args.weight_max, seed)
    if args.out:
        write_graph(g, args.out)
    rec = {"n": g.n, "m": g.m, "weighted": g.weighted, "min_degree": g.min_degree}
    if args.stats:
        rec["edge_connectivity"] = exact_edge_connectivity(g)
        d = exact_diameter(g)
        rec["diameter"] = None if math.isinf(d) else int(d)
    return rec, True


def cmd_oracle(args, g: Graph, seed: int):
    lam, side = min_cut(g)
    d = exact_diameter(g)
    rec = {
        "n": g.n,
        "m": g.m,
        "min_degree": g.min_degree,
        "edge_connectivity": lam,
        "min_cut_side": sorted(side),
        "diameter": None if math.isinf(d) else (float(d) if g.weighted else int(d)),
    }
    return rec, True


def cmd_pack(args, g: Graph, seed: int):
    if args.lam is None:
        found = exponential_search(g, args.c_const, args.bound_const, seed)
        part, lam, guesses = found.partition, found.lam_guess, found.guesses
    else:
        lam = exact_edge_connectivity(g) if args.lam == "oracle" else int(args.lam)
        part, guesses = partition(g, lam, args.c_const, seed), 0
    checks = verify_packing(g, part, args.bound_const)
    bound = diameter_bound(g, args.bound_const)
    rec = {
        "lam": lam,
        "lam_prime": part.count,
        "guesses": guesses,
        "bound": bound,
        "parts": [
            {"connected": c.connected, "diameter": None if math.isinf(c.diameter) else int(c.diameter), "within_bound": c.within_bound}
            for c in checks
        ],
    }
    ok = all(c.connected and c.within_bound for c in checks)
    if ok:
        rec["bfs_rounds"] = build_trees(g, part, seed).rounds
    return rec, ok


def cmd_broadcast(args, g: Graph, seed: int):
    inst = place_messages(g, args.k, args.placement, seed)
    if args.packing == "baseline":
        res = basic_broadcast(g, inst, seed=seed)
        lam = exact_edge_connectivity(g) if args.reference_lambda else None
        lb, ub = theory_references(g.n, g.min_degree, lam, inst.k)
        res.report.reference_lower_bound, res.report.reference_upper_formula = lb, ub
    else:
        packing, lam = _packing(g, args.packing, args.c_const, args.bound_const, seed)
        if lam is None and args.reference_lambda:
            lam = exact_edge_connectivity(g)
        res = k_broadcast(g, inst, packing, seed, lam=lam)
    rec = {"k": inst.k, "placement": args.placement, "packing": args.packing, **res.report.as_dict()}
    return rec, bool(res.report.correctness)


def cmd_apsp_unweighted(args, g: Graph, seed: int):
    packing, lam = _packing(g, args.packing, args.c_const, args.bound_const, seed)
    est, rep = apsp_mod.estimate_unweighted_apsp(g, args.c_cluster, args.c_const, seed, packing=packing, lam=lam)
    exact = oracle_apsp(g, False)
    alpha, beta = apsp_mod.worst_approximation(est.table, exact, 3)
    ok = bool((est.table >= exact).all() and (est.table <= 3 * exact + 2).all())
    rec = {"worst_alpha": alpha, "worst_beta": beta, "sandwich_holds": ok, **rep.as_dict()}
    return rec, ok and bool(rep.correctness)


def cmd_apsp_weighted(args, g: Graph, seed: int):
    if not g.weighted or args.weight_max:
        g = with_random_weights(g, args.weight_max or 100, args.graph_seed)
    r = auto_stretch(g.n) if args.stretch_auto or args.stretch_r is None else args.stretch_r
    packing, lam = _packing(g, args.packing, args.c_const, args.bound_const, seed)
    est, rep, sp = estimate_weighted_apsp(g, r, args.c_const, seed, packing=packing, lam=lam)
    exact = oracle_apsp(g, True)
    mask = exact > 0
    stretch = float((est.table[mask] / exact[mask]).max()) if mask.any() else 1.0
    ok = bool((est.table >= exact - 1e-9).all() and (est.table <= (2 * r - 1) * exact + 1e-9).all())
    rec = {"r": r, "worst_stretch": stretch, "stretch_holds": ok, "spanner_edges": sp.m, **rep.as_dict()}
    return rec, ok and bool(rep.correctness)


def read_queries(path: str, n: int) -> list[list[int]]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            side = sorted({int(x) for x in line.split()})
            if any(not 0 <= v < n for v in side):
                raise UsageError(f"query {line!r} names a node outside 0..{n - 1}")
            out.append(side)
    return out


def cmd_cuts(args, g: Graph, seed: int):
    lam = exact_edge_connectivity(g)
    sp = cuts_mod.uniform_cut_sparsifier(g, args.epsilon, args.c_sparsifier, lam, seed)
    packing, _ = _packing(g, args.packing, args.c_const, args.bound_const, seed)
    if args.queries:
        queries = read_queries(args.queries, g.n)
    elif g.n <= MAX_CUT_ENUM_N:
        masks, _ = all_cut_values(g)
        queries = [[i for i in range(g.n) if m >> i & 1] for m in masks.tolist()]
    else:
        queries = []
    res = cuts_mod.broadcast_and_estimate_cuts(g, sp, packing, queries, seed, lam=lam)
    errs = [a.relative_error for a in res.answers if a.relative_error is not None]
    within = sum(e <= args.epsilon for e in errs)
    rec = {
        "epsilon": args.epsilon,
        "queries": len(queries),
        "max_relative_error": max(errs) if errs else None,
        "within_epsilon": within,
        **res.report.as_dict(),
    }
    if args.show_answers:
        rec["answers"] = [
            {"side": sorted(a.side), "estimate": a.estimate, "truth": a.truth} for a in res.answers
        ]
    return rec, res.agree and bool(res.report.correctness) and within == len(errs)


# ---------------------------------------------------------------- summaries


def summarize(name: str, records: list[dict]) -> str:
    ok = [r for r in records if "error" not in r]
    parts = [f"{name}: {len(ok)}/{len(records)} trials ran"]
    if ok and "rounds_used" in ok[0]:
        parts.append(f"mean rounds {np.mean([r['rounds_used'] for r in ok]):.1f}")
    lbs = [r.get("reference_lower_bound") for r in ok if r.get("reference_lower_bound") is not None]
    if lbs:
        parts.append(f"lower bound ceil(k/lambda) = {lbs[0]}")
    ubs = [r.get("reference_upper_formula") for r in ok if r.get("reference_upper_formula") is not None]
    if ubs:
        parts.append(f"formula n ln n/delta + k ln n/lambda = {ubs[0]:.1f}")
    return "; ".join(parts)


def _jsonable(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, (np.ndarray, set, frozenset)):
        return sorted(o.tolist() if isinstance(o, np.ndarray) else o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def aggregate(records: list[dict]) -> dict:
    ok = [r for r in records if "error" not in r]
    row = {"trials": len(records), "failures": len(records) - len(ok), "breaches": sum(not r.get("ok", True) for r in ok)}
    keys = sorted(
        {k for r in ok for k, v in r.items() if isinstance(v, (int, float)) and not isinstance(v, bool)} - {"seed", "trial"}
    )
    for k in keys:
        vals = [r[k] for r in ok if isinstance(r.get(k), (int, float)) and not isinstance(r.get(k), bool)]
        if vals:
            row[f"mean_{k}"] = float(np.mean(vals))
            row[f"max_{k}"] = max(vals)
    return row


# ---------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser, graph=True):
    p.add_argument("--seed", type=int, default=0, help="base seed; trial i uses seed + i")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--json", metavar="PATH", help="write per-trial records as JSON")
    p.add_argument("--csv", metavar="PATH", help="write an aggregate CSV row")
    p.add_argument("--quiet", action="store_true")
    if graph:
        p.add_argument("--graph", metavar="FILE", help="graph file: 'n m [weighted]' then one edge per line")
        p.add_argument("--gen", metavar="KIND:k=v,...", help="generator spec, e.g. random_regular:n=64,d=8")
        p.add_argument("--graph-seed", type=int, default=0, help="seed for random generators and weights")
        p.add_argument("--random-ids", action="store_true", help="relabel nodes with random ids in [n^3]")


def _packing_flags(p, choices=("auto", "oracle", "single")):
    p.add_argument("--packing", choices=choices, default="auto")
    p.add_argument("--c-const", type=float, default=DEFAULT_C, help="partition constant C")
    p.add_argument("--bound-const", type=float, default=DEFAULT_BOUND_CONST)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="edgecast", description="Connectivity-aware CONGEST broadcast experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a graph file")
    _common(p)
    p.add_argument("--out", metavar="FILE")
    p.add_argument("--weight-max", type=int, default=0)
    p.add_argument("--stats", action="store_true", help="also compute connectivity and diameter")

    p = sub.add_parser("oracle", help="exact connectivity, min cut and diameter")
    _common(p)

    p = sub.add_parser("pack", help="random edge partition and its verification")
    _common(p)
    p.add_argument("--c-const", type=float, default=DEFAULT_C)
    p.add_argument("--bound-const", type=float, default=DEFAULT_BOUND_CONST)
    p.add_argument("--lam", default=None, help="connectivity to partition with: an integer or 'oracle'; default searches")

    p = sub.add_parser("broadcast", help="k-broadcast over a tree packing")
    _common(p)
    _packing_flags(p, ("auto", "oracle", "single", "baseline"))
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--placement", choices=PLACEMENTS, default="one-node")
    p.add_argument("--reference-lambda", action="store_true", help="compute exact lambda for the reference lines")

    p = sub.add_parser("apsp-unweighted", help="(3,2)-approximate APSP")
    _common(p)
    _packing_flags(p)
    p.add_argument("--c-cluster", type=float, default=3.0)

    p = sub.add_parser("apsp-weighted", help="(2r-1)-approximate weighted APSP")
    _common(p)
    _packing_flags(p)
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--stretch-r", type=int)
    grp.add_argument("--stretch-auto", action="store_true")
    p.add_argument("--weight-max", type=int, default=0, help="draw weights in [1, W] (default 100 for unweighted input)")

    p = sub.add_parser("cuts", help="sparsify, broadcast, estimate cuts")
    _common(p)
    _packing_flags(p)
    p.add_argument("--epsilon", type=float, default=0.25)
    p.add_argument("--c-sparsifier", type=float, default=cuts_mod.DEFAULT_CS)
    p.add_argument("--queries", metavar="FILE", help="one node subset per line; default: all cuts when n <= 20")
    p.add_argument("--show-answers", action="store_true")
    return parser


COMMANDS: dict[str, Callable] = {
    "gen": cmd_gen,
    "oracle": cmd_oracle,
    "pack": cmd_pack,
    "broadcast": cmd_broadcast,
    "apsp-unweighted": cmd_apsp_unweighted,
    "apsp-weighted": cmd_apsp_weighted,
    "cuts": cmd_cuts,
}


def _validate(args):
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.command == "broadcast" and args.k < 0:
        raise UsageError("--k must be >= 0")
    if args.command == "cuts" and not 0 < args.epsilon < 1:
        raise UsageError("--epsilon must lie in (0, 1)")
    if args.command == "apsp-weighted" and args.stretch_r is not None and args.stretch_r < 1:
        raise UsageError("--stretch-r must be >= 1")
    if args.command == "pack" and args.lam not in (None, "oracle"):
        try:
            if int(args.lam) < 1:
                raise ValueError
        except ValueError:
            raise UsageError("--lam must be a positive integer or 'oracle'") from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _validate(args)
        g = load_graph(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"edgecast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    fn = COMMANDS[args.command]
    records = []
    for i in range(args.trials):
        seed = args.seed + i
        try:
            rec, ok = fn(args, g, seed)
            rec = {"trial": i, "seed": seed, "ok": ok, **rec}
        except UsageError as exc:
            print(f"edgecast: error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        except Exception as exc:  # recorded per trial; other trials still run
            rec = {"trial": i, "seed": seed, "error": f"{type(exc).__name__}: {exc}"}
        records.append(rec)

    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("json", "csv", "quiet")}
    doc = {"command": args.command, "config": config, "trials": records}
    if args.json:
        with open(args.json, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2, sort_keys=True, default=_jsonable)
            f.write("\n")
    if args.csv:
        row = aggregate(records)
        with open(args.csv, "w", newline="", encoding="utf-8") as f:
            w = csv.DictWriter(f, fieldnames=list(row))
            w.writeheader()
            w.writerow(row)
    if not args.quiet:
        print(summarize(args.command, records))
        if not args.json:
            json.dump(doc, sys.stdout, indent=2, sort_keys=True, default=_jsonable)
            print()

    if any("error" in r for r in records):
        return EXIT_PIPELINE
    if not all(r["ok"] for r in records):
        return EXIT_BREACH
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
