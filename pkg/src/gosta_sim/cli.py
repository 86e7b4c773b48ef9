"""Command-line interface.

Subcommands: spectrum, simulate, expect, bounds, experiment, table1,
gen-graph, gen-data. Data outputs are CSV, summaries are JSON; exit code 0
on success, nonzero with a message on stderr otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from . import engines, expectation, harness, kernels
from .engines import EngineConfig, relative_error
from .graph import read_graph_file, write_graph_file
from .spectral import beta_second_smallest

PROTOCOL_CHOICES = engines.PROTOCOLS
BOUND_PROTOCOLS = ("gosta_sync", "u2", "gosta_async")


def _load_graph(spec_text: str, seed: int):
    return harness.build_graph_from_spec(
        harness.parse_graph_spec_string(spec_text), seed)


def _load_kernel(kernel_name: str, data_path: str, cell_column: int):
    if kernel_name == "scatter":
        design, part = kernels.load_partitioned_csv(data_path, cell_column)
        return kernels.build_kernel_matrix("scatter", design, part), design
    if kernel_name == "auc":
        ds = kernels.load_labeled_csv(data_path)
        return kernels.build_kernel_matrix("auc", ds), ds.design
    design = kernels.load_design_csv(data_path)
    return kernels.build_kernel_matrix("variance", design), design


def _cmd_spectrum(args) -> int:
    g = read_graph_file(args.graphfile)
    beta = beta_second_smallest(g)
    m = g.num_edges
    payload = {
        "n": g.n,
        "m": m,
        "beta_second_smallest": beta,
        "lambda2_w2": 1.0 - beta / (2.0 * m),
        "lambda2_w1": 1.0 - beta / m,
        "gap_c": beta / (2.0 * m),
    }
    print(json.dumps(payload, sort_keys=True))
    return 0


def _cmd_simulate(args) -> int:
    g = _load_graph(args.graph, args.seed)
    km, design = _load_kernel(args.kernel, args.data, args.cell_column)
    x = design.rows[:, 0].copy() if args.protocol == "boyd" else None
    lines = ["run,t,comm_units,err_mean,err_std"]
    per_node_lines = ["run,t,node,estimate,error"]
    for run in range(args.runs):
        cfg = EngineConfig(protocol=args.protocol, max_iters=args.iters,
                           record_every=args.record_every,
                           seed=engines.derive_seed(args.seed, 0, run))
        trace = engines.run_protocol(cfg, g=g, km=km, x=x)
        err = relative_error(trace)
        for k, t in enumerate(trace.ts):
            lines.append(f"{run},{int(t)},{int(trace.comm_units[k])},"
                         f"{float(err.mean[k]):.17g},{float(err.std[k]):.17g}")
            if args.per_node:
                truth = np.atleast_1d(np.asarray(trace.truth))
                diff = np.abs(trace.estimates[k] - truth)
                nodes_err = diff if err.absolute else diff / np.abs(truth)
                for node in range(trace.estimates.shape[1]):
                    per_node_lines.append(
                        f"{run},{int(t)},{node + 1},"
                        f"{trace.estimates[k, node]:.17g},"
                        f"{nodes_err[node]:.17g}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    if args.per_node:
        extra = Path(args.out).with_suffix(".nodes.csv")
        extra.write_text("\n".join(per_node_lines) + "\n")
    return 0


def _cmd_expect(args) -> int:
    g = _load_graph(args.graph, args.seed)
    km, design = _load_kernel(args.kernel, args.data, args.cell_column)
    cps = expectation.geometric_checkpoints(args.t_max)
    kw = {} if args.cap is None else {"cap": args.cap}
    if args.protocol == "boyd":
        x = design.rows[:, 0].copy()
        oracle = expectation.boyd_expectation(g, x, args.t_max, cps, **kw)
        target = np.full(g.n, x.mean())
    elif args.protocol == "gosta_sync":
        oracle = expectation.gosta_sync_expectation(g, km, args.t_max, cps,
                                                    **kw)
        target = np.full(g.n, km.u_stat)
    elif args.protocol == "gosta_async":
        oracle = expectation.gosta_async_expectation(g, km, args.t_max, cps,
                                                     **kw)
        target = np.full(g.n, km.u_stat)
    elif args.protocol == "u1":
        oracle = expectation.u1_expectation(g, km, args.t_max, cps, **kw)
        target = km.row_means
    elif args.protocol == "u2":
        oracle = expectation.u2_expectation(g, km, args.t_max, cps, **kw)
        target = np.full(g.n, km.u_stat)
    else:
        raise ValueError(f"no expectation oracle for '{args.protocol}'")
    lines = ["t,node,expected_Z,target,abs_err"]
    for t in sorted(oracle):
        for node in range(g.n):
            val = oracle[t][node]
            tgt = target[node]
            lines.append(f"{int(t)},{node + 1},{val:.17g},{tgt:.17g},"
                         f"{abs(val - tgt):.17g}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def _cmd_bounds(args) -> int:
    g = _load_graph(args.graph, args.seed)
    km, _ = _load_kernel(args.kernel, args.data, args.cell_column)
    grid = expectation.geometric_checkpoints(args.t_max)
    report = bounds_mod.bound_report(g, km, args.protocol, grid,
                                     cap=args.cap)
    lines = ["t,actual_err,bound_val,ratio"]
    for k, t in enumerate(report.t_grid):
        actual = report.actual_err[k]
        bound = report.bound_val[k]
        ratio = bound / actual if actual > 0 else float("inf")
        lines.append(f"{int(t)},{actual:.17g},{bound:.17g},{ratio:.17g}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(json.dumps(report.constants, sort_keys=True, default=float))
    return 0


def _cmd_experiment(args) -> int:
    spec = harness.load_experiment(args.config)
    result = harness.run_experiment(spec)
    summary = {
        proto: {
            "final_t": int(agg.ts[-1]),
            "final_err_mean": float(agg.err_mean[-1]),
            "final_comm_units": int(agg.comm_units[-1]),
        }
        for proto, agg in result.protocols.items()
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_table1(args) -> int:
    specs = [harness.parse_graph_spec_string(s) for s in args.graph]
    rows = harness.table1(specs, seed=args.seed)
    lines = ["family,n,m,gap"]
    for row in rows:
        lines.append(f"{row['family']},{row['n']},{row['m']},"
                     f"{row['gap']:.17g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_gen_graph(args) -> int:
    g = _load_graph(args.family_spec, args.seed)
    write_graph_file(g, args.out)
    return 0


def _cmd_gen_data(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "gaussian_mixture":
        design, part = harness.synth_gaussian_mixture(
            args.n, args.d, args.clusters, args.separation, rng)
        kernels.write_design_csv(args.out, design.rows, part.assignment)
    elif args.kind == "two_class":
        ds = harness.synth_two_class(args.n, args.d, args.margin, rng)
        kernels.write_design_csv(args.out, ds.design.rows, ds.labels)
    else:
        design, _ = harness.synth_gaussian_mixture(
            args.n, args.d, 1, 0.0, rng)
        kernels.write_design_csv(args.out, design.rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gosta-sim",
        description="Gossip-based decentralized estimation of pairwise "
                    "statistics: simulators, oracles and bounds.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="spectral gap constants of a graph file")
    p.add_argument("graphfile")
    p.set_defaults(func=_cmd_spectrum)

    def add_common(p, with_protocol=True, protocols=PROTOCOL_CHOICES):
        if with_protocol:
            p.add_argument("--protocol", required=True, choices=protocols)
        p.add_argument("--graph", required=True,
                       help="graph spec (complete:n=100, grid2d:rows=8,cols=8,"
                            " watts_strogatz:n=100,k=5,p=0.3) or a file path")
        p.add_argument("--kernel", required=True,
                       choices=("variance", "scatter", "auc"))
        p.add_argument("--data", required=True, help="dataset CSV path")
        p.add_argument("--cell-column", type=int, default=-1,
                       help="cell-id column for the scatter kernel")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="Monte-Carlo protocol runs")
    add_common(p)
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--per-node", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("expect", help="expected-dynamics oracle curves")
    add_common(p, protocols=("boyd", "u1", "u2", "gosta_sync", "gosta_async"))
    p.add_argument("--t-max", type=int, required=True)
    p.add_argument("--cap", type=int, default=None,
                   help="override the oracle size cap")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_expect)

    p = sub.add_parser("bounds", help="bound vs exact expected error")
    add_common(p, protocols=BOUND_PROTOCOLS)
    p.add_argument("--t-max", type=int, required=True)
    p.add_argument("--cap", type=int, default=None,
                   help="override the oracle size cap")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("experiment", help="run a JSON experiment config")
    p.add_argument("config")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("table1", help="averaging-gap table for graph specs")
    p.add_argument("--graph", action="append", required=True,
                   help="repeatable graph spec")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_table1)

    p = sub.add_parser("gen-graph", help="write a generated graph file")
    p.add_argument("family_spec", help="graph spec string")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_graph)

    p = sub.add_parser("gen-data", help="write a synthetic dataset CSV")
    p.add_argument("--kind", required=True,
                   choices=("gaussian_mixture", "two_class", "plain"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--clusters", type=int, default=3)
    p.add_argument("--separation", type=float, default=5.0)
    p.add_argument("--margin", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"gosta-sim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
