"""Command-line interface.

Exit codes: 0 success, 1 "not equivalent" from ``equiv``, 2 invalid input,
3 degenerate data, 4 internal inconsistency.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from pathlib import Path

from . import __version__
from .equivalence import cpdag, markov_equivalent, pi_equivalent
from .errors import (BudgetExceeded, DegenerateData, DimensionMismatch,
                     InternalInconsistency, SingularRegression)
from .graph import Dag, Partition, Pdag
from .io import (InputError, graph_document, load_graph, params_document, parse_partition,
                 read_data_csv, read_json, write_data_csv, write_json)
from .learning import SearchConfig, bic_score, greedy_search, sample_covariance, shd
from .simulation import SimConfig, draw_truth, run_experiment, sample_data, substream, summarize

EXIT_OK, EXIT_DIFFERENT, EXIT_INPUT, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3, 4


def _emit(obj) -> None:
    print(json.dumps(obj, separators=(",", ":")))


def _partition_for(args, names, fallback=None) -> Partition:
    if getattr(args, "partition", None):
        return parse_partition(read_json(args.partition), names)
    if fallback is not None:
        return fallback
    return Partition.minimal(len(names))


def _require_dag(doc, what) -> Dag:
    if not isinstance(doc.graph, Dag):
        raise InputError(f"{what} must be a DAG (all edges directed, no cycle)")
    return doc.graph


def _node_names(cfg: dict, p: int) -> list[str]:
    names = cfg.get("nodes") or [f"X{k + 1}" for k in range(p)]
    if len(names) != p:
        raise InputError(f"config lists {len(names)} node names for p={p}")
    return [str(v) for v in names]


def _sim_config(cfg: dict, seed=None) -> tuple[SimConfig, list[str]]:
    try:
        p = int(cfg["p"])
        names = _node_names(cfg, p)
        custom = None
        blocks = cfg.get("blocks", "two_blocks")
        if cfg.get("partition") is not None:
            custom = tuple(tuple(b) for b in parse_partition(cfg["partition"], names).blocks)
            blocks = "custom"
        sim = SimConfig(
            p=p, n=int(cfg["n"]), regime=cfg.get("regime", "sparse"), blocks=blocks,
            replicates=int(cfg.get("replicates", 1)),
            seed=int(seed if seed is not None else cfg.get("seed", 0)),
            custom_blocks=custom, restarts=int(cfg.get("restarts", 5)),
            neighborhood_cap=int(cfg.get("neighborhood_cap", 300)))
    except KeyError as exc:
        raise InputError(f"config is missing {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid config: {exc}") from exc
    return sim, names


def cmd_simulate(args) -> int:
    cfg = read_json(args.config)
    sim, names = _sim_config(cfg, args.seed)
    g, pi, params = draw_truth(sim, 0)
    data = sample_data(g, params, sim.n, substream(sim.seed, 0, "noise"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "truth.json", graph_document(names, g, pi))
    write_json(out / "params.json", params_document(names, g, params))
    write_data_csv(out / "data.csv", names, data)
    _emit({"truth": str(out / "truth.json"), "params": str(out / "params.json"),
           "data": str(out / "data.csv"), "n": sim.n, "p": sim.p})
    return EXIT_OK


def cmd_learn(args) -> int:
    names, data = read_data_csv(args.data)
    pi = _partition_for(args, names)
    s = sample_covariance(data)
    cfg = SearchConfig(restarts=args.restarts, neighborhood_cap=args.cap, seed=args.seed,
                       max_iters=args.max_iters, slack=args.tol)
    res = greedy_search(s, pi, cfg)
    doc = graph_document(names, res.cpdag, pi)
    if args.trace:
        write_json(args.trace, res.trace)
    if args.out:
        write_json(args.out, doc)
        _emit({"bic": res.score, "out": args.out})
    else:
        _emit({"bic": res.score, "cpdag": doc})
    return EXIT_OK


def cmd_cpdag(args) -> int:
    doc = load_graph(args.graph)
    g = _require_dag(doc, "graph")
    pi = _partition_for(args, doc.nodes, doc.partition)
    out = graph_document(doc.nodes, cpdag(g, pi), pi)
    if args.out:
        write_json(args.out, out)
    _emit(out)
    return EXIT_OK


def _aligned(d1, d2):
    if sorted(d1.nodes) != sorted(d2.nodes):
        raise InputError("graphs are declared over different node names")
    if d1.nodes == d2.nodes:
        return d2.graph
    pos = {name: k for k, name in enumerate(d1.nodes)}
    m = [pos[name] for name in d2.nodes]
    if isinstance(d2.graph, Dag):
        return Dag(d2.p, [(m[i], m[j]) for i, j in d2.graph.edges])
    return Pdag(d2.p, [(m[i], m[j]) for i, j in d2.graph.directed],
                [(m[i], m[j]) for i, j in d2.graph.undirected])


def cmd_equiv(args) -> int:
    d1, d2 = load_graph(args.g1), load_graph(args.g2)
    g1 = _require_dag(d1, "first graph")
    _require_dag(d2, "second graph")
    g2 = _aligned(d1, d2)
    pi = _partition_for(args, d1.nodes, d1.partition)
    same = pi_equivalent(g1, g2, pi)
    _emit({"verdict": "equivalent" if same else "not_equivalent",
           "markov_equivalent": markov_equivalent(g1, g2)})
    return EXIT_OK if same else EXIT_DIFFERENT


def cmd_score(args) -> int:
    doc = load_graph(args.graph)
    g = _require_dag(doc, "graph")
    names, data = read_data_csv(args.data)
    if names != doc.nodes:
        raise InputError("data header must list the graph's nodes in the same order")
    pi = _partition_for(args, names, doc.partition)
    _emit({"bic": bic_score(g, pi, sample_covariance(data))})
    return EXIT_OK


def cmd_shd(args) -> int:
    d1, d2 = load_graph(args.g1), load_graph(args.g2)
    _emit({"shd": shd(d1.graph, _aligned(d1, d2))})
    return EXIT_OK


RESULT_FIELDS = ["p", "n", "regime", "blocks", "replicate", "shd_gev", "shd_baseline_pi_min",
                 "truth", "estimate", "estimate_pi_min", "error", "runtime"]


def _edge_str(g) -> str:
    if g is None:
        return ""
    if isinstance(g, Dag):
        g = Pdag.from_dag(g)
    parts = [f"{i}->{j}" for i, j in sorted(g.directed)]
    parts += [f"{i}-{j}" for i, j in sorted(g.undirected)]
    return ";".join(parts)


def _expand(cfg: dict) -> list[dict]:
    keys = ["p", "n", "regime", "blocks"]
    axes = [cfg[k] if isinstance(cfg.get(k), list) else [cfg.get(k)] for k in keys]
    out = []
    for combo in itertools.product(*axes):
        c = dict(cfg)
        c.update({k: v for k, v in zip(keys, combo) if v is not None})
        out.append(c)
    return out


def cmd_experiment(args) -> int:
    base = read_json(args.config)
    configs = [_sim_config(c, args.seed)[0] for c in _expand(base)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for sim in configs:
            results = run_experiment(sim, threads=args.threads)
            for r in results:
                w.writerow([sim.p, sim.n, sim.regime, sim.blocks, r.replicate,
                            "" if r.shd_gev is None else r.shd_gev,
                            "" if r.shd_baseline_pi_min is None else r.shd_baseline_pi_min,
                            _edge_str(r.truth), _edge_str(r.estimate),
                            _edge_str(r.estimate_pi_min), r.error, f"{r.runtime:.4f}"])
            summary.append({"p": sim.p, "n": sim.n, "regime": sim.regime, "blocks": sim.blocks,
                            "seed": sim.seed, **summarize(results)})
    write_json(out / "summary.json", summary)
    _emit({"results": str(out / "results.csv"), "summary": str(out / "summary.json"),
           "configurations": len(configs)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker processes (results do not depend on it)")
    common.add_argument("--tol", type=float, default=1e-12,
                        help="minimum BIC improvement accepted by the search")

    parser = argparse.ArgumentParser(
        prog="phsem", description="Causal discovery with partially equal error variances.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="draw a random model and data")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("learn", parents=[common], help="greedy BIC search from data")
    p.add_argument("data")
    p.add_argument("--partition")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--cap", type=int, default=300, help="neighborhood size bound")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--out")
    p.add_argument("--trace")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("cpdag", parents=[common], help="CPDAG of a DAG under a partition")
    p.add_argument("graph")
    p.add_argument("--partition")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cpdag)

    p = sub.add_parser("equiv", parents=[common], help="decide model equivalence")
    p.add_argument("g1")
    p.add_argument("g2")
    p.add_argument("--partition")
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("score", parents=[common], help="BIC of a DAG")
    p.add_argument("graph")
    p.add_argument("data")
    p.add_argument("--partition")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("shd", parents=[common], help="modified structural Hamming distance")
    p.add_argument("g1")
    p.add_argument("g2")
    p.set_defaults(func=cmd_shd)

    p = sub.add_parser("experiment", parents=[common], help="run the simulation study")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "learn" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except (DegenerateData, SingularRegression) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InternalInconsistency as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (InputError, DimensionMismatch, BudgetExceeded, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
