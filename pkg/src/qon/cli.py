"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error, 2 a run failed (solver
instability, schedule audit failure, or any failed run inside a sweep).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys

import numpy as np

from . import __version__
from .experiment import ConfigError, ExperimentConfig, make_topology, run_batch, summarize
from .fidelity import purify_table
from .formulation import OBJECTIVES, POLICIES, make_scenario, solve_scenario
from .formulation.scenario import ScenarioError
from .lp import Status
from .overlay import OverlayError, build_virtual_graph, describe, enumerate_user_paths
from .topology import StorageConfig, TopologyError, select_storage
from .workload import DemandMatrix, WorkloadError, sample_user_pairs, spike_workload, topology_capacity

log = logging.getLogger("qon")

EXIT_OK, EXIT_USAGE, EXIT_RUN_FAILED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _node(tok: str):
    return int(tok) if tok.lstrip("-").isdigit() else tok


def _pairs(text: str) -> list[tuple]:
    out = []
    for item in text.split(","):
        a, sep, b = item.strip().partition("-")
        if not sep:
            raise argparse.ArgumentTypeError(f"pair {item!r} is not of the form a-b")
        out.append((_node(a), _node(b)))
    return out


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _topology(args):
    spec = args.topology
    if os.path.exists(spec):
        spec = ("gml:" if spec.endswith(".gml") else "file:") + spec
    return make_topology(spec, args.topology_seed, args.cap_range, args.fid_range)


def _storage(args, topo):
    if args.storage is not None:
        nodes = [_node(x) for x in args.storage.split(",") if x.strip()]
        st = StorageConfig.complete(nodes, args.storage_capacity)
        st.validate_against(topo)
        return st
    return select_storage(topo, args.storage_count, args.scheme, args.seed, args.storage_capacity)


def _add_common(p: argparse.ArgumentParser, lp: bool = True) -> None:
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--out", help="output file (stdout if omitted) or directory for sweep")
    p.add_argument("--export-lp", metavar="PATH", help="write the LP in LP-file format" if lp else argparse.SUPPRESS)


def _add_topology_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", default="pa:20:2", help="file path, pa:<n>:<m> or er:<n>:<p>")
    p.add_argument("--topology-seed", type=int, default=0)
    p.add_argument("--cap-range", type=_floats, default=[200.0, 1400.0])
    p.add_argument("--fid-range", type=_floats, default=[0.96, 0.99])


def _add_storage_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--storage", help="comma-separated storage nodes (overrides --storage-count)")
    p.add_argument("--storage-count", type=int, default=0)
    p.add_argument("--scheme", choices=("Degree", "Random"), default="Degree")
    p.add_argument("--storage-capacity", type=int, default=12000)


# -- subcommands ---------------------------------------------------------------


def cmd_gen_topology(args) -> int:
    from .topology import assign_link_params, gen_erdos_renyi, gen_preferential_attachment

    if args.model == "pa":
        topo = gen_preferential_attachment(args.n, int(args.param), args.seed)
    else:
        topo = gen_erdos_renyi(args.n, float(args.param), args.seed)
    if not args.no_params:
        topo = assign_link_params(topo, tuple(args.cap_range), tuple(args.fid_range), args.seed)
    if args.export_lp:
        log.warning("gen-topology builds no LP; --export-lp ignored")
    _emit(topo.to_text(), args.out)
    return EXIT_OK


def cmd_gen_workload(args) -> int:
    mean = args.spike_mean
    if mean is None:
        topo = _topology(args)
        cap = topology_capacity(topo, args.capacity_threshold, n_sets=args.capacity_sets,
                                pairs_per_set=args.pairs, seed=args.seed)
        mean = args.scale * cap / max(1, args.spikes)
        log.info("network capacity %.6g, spike mean %.6g", cap, mean)
    dm = spike_workload(args.pairs, args.intervals, args.spikes, mean, args.base_mean, args.seed, args.threshold)
    if args.export_lp:
        log.warning("gen-workload builds no single LP; --export-lp ignored")
    _emit(dm.to_csv(), args.out)
    return EXIT_OK


def cmd_purify_table(args) -> int:
    rows = purify_table(args.fidelities, args.targets, args.retwirl)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["F", "F_target", "k_max", "g"])
    for f, t, k, g in rows:
        wr.writerow([repr(f), repr(t), "" if k is None else k, repr(g)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    topo = _topology(args)
    storage = _storage(args, topo)
    if args.demands:
        with open(args.demands) as fh:
            dm = DemandMatrix.from_csv(fh.read())
        n_pairs, T = dm.shape
        if T != args.intervals:
            log.info("using |T|=%d from the demand file", T)
    else:
        n_pairs, T = (len(args.pairs) if args.pairs else args.n_pairs), args.intervals
        dm = spike_workload(n_pairs, T, min(args.spikes, n_pairs), args.spike_mean, seed=args.seed,
                            threshold=args.threshold)
    pairs = args.pairs or sample_user_pairs(topo, n_pairs, args.seed)
    if len(pairs) != n_pairs:
        raise UsageError(f"{len(pairs)} user pairs given but the demand matrix has {n_pairs}")
    weights = args.weights if args.weights is not None else np.random.default_rng(args.seed + 2).random((n_pairs, T))
    s = make_scenario(
        topo, storage, pairs, n_intervals=T, delta=args.delta, thresholds=dm.thresholds,
        lifetime=args.lifetime, demands=dm.demands, weights=weights, paths_per_pair=args.paths,
        paths_per_storage_pair=args.storage_paths, path_scheme=args.path_scheme, periodic=args.periodic,
        retwirl=args.retwirl,
    )
    res = solve_scenario(s, args.objective, args.policy, args.backend, args.export_lp)
    print(f"status {res.status.value}")
    print(f"variables {res.model.n_vars} constraints {res.model.n_constraints} iterations {res.solution.iterations}")
    if res.schedule is None:
        return EXIT_RUN_FAILED if res.status is Status.NUMERICALLY_UNSTABLE else EXIT_OK
    from .experiment import edge_sharing, metric_delay, metric_utilization

    print(f"objective {res.schedule.objective!r}")
    print(f"max_residual {res.report.max_residual:.3e}")  # type: ignore[union-attr]
    for name, fn in (("mean_delay", metric_delay), ("utilization", metric_utilization), ("edge_sharing", edge_sharing)):
        v = fn(res.schedule, s)
        print(f"{name} {'' if v is None else repr(v)}")
    if res.replay is not None:
        print(f"replay {res.replay.policy} shortfall {res.replay.shortfall!r}")
    if args.out:
        _emit(res.schedule.to_csv(), args.out)
    if not res.report.ok:  # type: ignore[union-attr]
        for v in res.report.violations[:10]:  # type: ignore[union-attr]
            print(f"violation {v}", file=sys.stderr)
        return EXIT_RUN_FAILED
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.config:
        with open(args.config) as fh:
            cfg = ExperimentConfig.from_text(fh.read())
    else:
        cfg = ExperimentConfig()
    for key in ("workloads", "objective", "n_intervals", "demand_scale", "lifetime", "policy", "topology"):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    if args.storage_counts is not None:
        cfg.storage_counts = args.storage_counts
    if args.thresholds is not None:
        cfg.thresholds = args.thresholds
    if args.seed_given:
        cfg.seed = args.seed
    if args.out:
        cfg.out = args.out
    cfg.validate()
    if args.write_config:
        with open(args.write_config, "w") as fh:
            fh.write(cfg.to_text())
    result = run_batch(cfg, jobs=args.jobs, export_lp_dir=args.export_lp)
    for (f, c), recs in result.points().items():
        summ = summarize(recs)
        print(f"F={f:g} storage={c} satisfied={summ['satisfied']} objective={summ['objective']} failures={summ['failures']}")
    for path in result.files:
        print(f"wrote {path}")
    if result.failures:
        print(f"{len(result.failures)} run(s) failed", file=sys.stderr)
        return EXIT_RUN_FAILED
    return EXIT_OK


def cmd_dump_overlay(args) -> int:
    topo = _topology(args)
    storage = _storage(args, topo)
    vg = build_virtual_graph(topo, storage, args.storage_paths)
    pairs = args.pairs or []
    registry = {pair: enumerate_user_paths(vg, pair, args.paths, scheme=args.path_scheme) for pair in pairs}
    if args.export_lp:
        log.warning("dump-overlay builds no LP; --export-lp ignored")
    _emit(describe(vg, registry), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qon", description="Storage-assisted entanglement routing experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-topology", help="generate a random topology in text format")
    p.add_argument("model", choices=("pa", "er"))
    p.add_argument("n", type=int)
    p.add_argument("param", help="m for pa, p for er")
    p.add_argument("--cap-range", type=_floats, default=[200.0, 1400.0])
    p.add_argument("--fid-range", type=_floats, default=[0.96, 0.99])
    p.add_argument("--no-params", action="store_true", help="leave capacities and fidelities unset")
    _add_common(p)
    p.set_defaults(fn=cmd_gen_topology)

    p = sub.add_parser("gen-workload", help="spike-model demand matrix as CSV")
    _add_topology_args(p)
    p.add_argument("--pairs", type=int, default=6)
    p.add_argument("--intervals", type=int, default=10)
    p.add_argument("--spikes", type=int, default=3)
    p.add_argument("--spike-mean", type=float, help="fixed spike mean; default normalises by network capacity")
    p.add_argument("--base-mean", type=float)
    p.add_argument("--scale", type=float, default=1.0, help="multiplier on the normalised spike mean")
    p.add_argument("--threshold", type=float, default=0.8)
    p.add_argument("--capacity-threshold", type=float, default=0.75)
    p.add_argument("--capacity-sets", type=int, default=5)
    _add_common(p)
    p.set_defaults(fn=cmd_gen_workload)

    p = sub.add_parser("purify-table", help="purification cost grid as CSV")
    p.add_argument("--fidelities", type=_floats, default=[0.81, 0.85, 0.89, 0.93, 0.97, 0.99])
    p.add_argument("--targets", type=_floats, default=[0.8, 0.85, 0.9, 0.95])
    p.add_argument("--retwirl", action="store_true", help="twirl back to a Werner state between rounds")
    _add_common(p)
    p.set_defaults(fn=cmd_purify_table)

    p = sub.add_parser("solve", help="build and solve a single scenario")
    _add_topology_args(p)
    _add_storage_args(p)
    p.add_argument("--pairs", type=_pairs, help="user pairs as a-b,c-d (sampled if omitted)")
    p.add_argument("--n-pairs", type=int, default=6)
    p.add_argument("--demands", help="demand CSV from gen-workload")
    p.add_argument("--spike-mean", type=float, default=100.0)
    p.add_argument("--spikes", type=int, default=3)
    p.add_argument("--weights", type=float, help="uniform weight (random in [0,1] if omitted)")
    p.add_argument("--objective", choices=OBJECTIVES, default="feasibility")
    p.add_argument("--lifetime", type=int, help="storage lifetime in intervals (unbounded if omitted)")
    p.add_argument("--policy", choices=POLICIES, default="Free")
    p.add_argument("--intervals", type=int, default=10)
    p.add_argument("--delta", type=float, default=20.0)
    p.add_argument("--threshold", type=float, default=0.8)
    p.add_argument("--paths", type=int, default=1, help="physical paths per user pair")
    p.add_argument("--storage-paths", type=int, default=1, help="virtual links per storage pair")
    p.add_argument("--path-scheme", choices=("access", "shortest"), default="access")
    p.add_argument("--periodic", action="store_true")
    p.add_argument("--retwirl", action="store_true")
    p.add_argument("--backend", choices=("simplex", "highs"), default="simplex")
    _add_common(p)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("sweep", help="batch experiment from a config file")
    p.add_argument("--config", help="key = <json> config file")
    p.add_argument("--write-config", metavar="PATH", help="write the resolved config")
    p.add_argument("--workloads", type=int)
    p.add_argument("--objective", choices=OBJECTIVES)
    p.add_argument("--n-intervals", type=int)
    p.add_argument("--demand-scale", type=float)
    p.add_argument("--lifetime", type=int)
    p.add_argument("--policy", choices=POLICIES)
    p.add_argument("--topology")
    p.add_argument("--storage-counts", type=_ints)
    p.add_argument("--thresholds", type=_floats)
    p.add_argument("--jobs", type=int, default=1)
    _add_common(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("dump-overlay", help="print virtual links and path registries")
    _add_topology_args(p)
    _add_storage_args(p)
    p.add_argument("--pairs", type=_pairs)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--storage-paths", type=int, default=1)
    p.add_argument("--path-scheme", choices=("access", "shortest"), default="access")
    _add_common(p)
    p.set_defaults(fn=cmd_dump_overlay)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.seed_given = "--seed" in argv or any(a.startswith("--seed=") for a in argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except (UsageError, ConfigError, TopologyError, ScenarioError, OverlayError, WorkloadError, OSError, ValueError) as exc:
        print(f"qon: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
