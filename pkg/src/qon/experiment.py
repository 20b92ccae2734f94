"""Batch experiments: configuration, sweep execution and metrics.

A sweep runs every (threshold, storage count, workload) combination of an
:class:`ExperimentConfig` as an independent task and writes one CSV per
(threshold, storage count) point plus a summary.  Output bytes depend only
on the config (including its master seed), never on worker scheduling.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache

import numpy as np

from .formulation import FEASIBILITY, MAX_WEGR, OBJECTIVES, POLICIES, make_scenario, solve_scenario
from .formulation.schedule import AllocationSchedule
from .formulation.scenario import Scenario
from .lp import Status
from .overlay import build_virtual_graph, expand_path
from .topology import (
    Topology,
    assign_link_params,
    gen_erdos_renyi,
    gen_preferential_attachment,
    load_gml,
    load_topology,
    select_storage,
)
from .workload import normalized_spike_workload, sample_user_pairs, topology_capacity

log = logging.getLogger(__name__)

SCHEMA = "qon-sweep/1"
RUN_COLUMNS = [
    "threshold",
    "storage_count",
    "workload",
    "seed",
    "status",
    "satisfied",
    "objective",
    "egr",
    "mean_delay",
    "utilization",
    "edge_sharing",
    "max_residual",
    "replay_shortfall",
    "error",
]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Everything a sweep needs; defaults follow the evaluation set-up.

    ``topology`` is ``pa:<n>:<m>``, ``er:<n>:<p>``, ``file:<path>`` (text
    format) or ``gml:<path>``.  ``lifetime`` of None means pairs never
    expire.  ``weights`` is a number or ``"random"`` (uniform on [0, 1] per
    pair and interval, seeded per workload).
    """

    topology: str = "pa:20:2"
    topology_seed: int = 0
    cap_range: list = field(default_factory=lambda: [200.0, 1400.0])
    fid_range: list = field(default_factory=lambda: [0.96, 0.99])
    storage_counts: list = field(default_factory=lambda: [0, 2, 4, 6])
    scheme: str = "Degree"
    storage_capacity: int = 12000
    lifetime: int | None = None
    policy: str = "Free"
    delta: float = 20.0
    n_intervals: int = 10
    thresholds: list = field(default_factory=lambda: [0.8])
    paths_per_pair: int = 1
    paths_per_storage_pair: int = 1
    path_scheme: str = "access"
    n_pairs: int = 6
    spikes_per_interval: int = 3
    demand_scale: float = 1.0
    capacity_threshold: float = 0.75
    capacity_sets: int = 5
    workloads: int = 20
    objective: str = FEASIBILITY
    weights: object = "random"
    seed: int = 0
    backend: str = "simplex"
    out: str = "results"

    def validate(self) -> None:
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}")
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}")
        if self.scheme not in ("Degree", "Random"):
            raise ConfigError("scheme must be Degree or Random")
        if self.workloads < 0 or self.n_intervals < 1 or self.delta <= 0:
            raise ConfigError("workloads >= 0, n_intervals >= 1 and delta > 0 required")
        if any(c < 0 for c in self.storage_counts):
            raise ConfigError("storage counts must be >= 0")
        if any(not 0.25 < f <= 1 for f in self.thresholds):
            raise ConfigError("thresholds must lie in (0.25, 1]")
        if self.lifetime is not None and self.lifetime < 1:
            raise ConfigError("lifetime must be >= 1")
        if not (isinstance(self.weights, (int, float)) or self.weights == "random"):
            raise ConfigError("weights must be a number or 'random'")

    # -- file form ---------------------------------------------------------

    def to_text(self) -> str:
        """``key = <json value>`` lines in field order."""
        return "".join(f"{k} = {json.dumps(v)}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        values = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            key = key.strip()
            if not sep or key not in known:
                raise ConfigError(f"line {n}: expected '<known key> = <json>'")
            try:
                values[key] = json.loads(val)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"line {n}: {exc}") from None
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def provenance(self) -> str:
        """Resolved config as canonical JSON; the output location is left out."""
        d = asdict(self)
        d.pop("out")
        return json.dumps(d, sort_keys=True)


# -- topology and workloads --------------------------------------------------


def make_topology(spec: str, seed: int = 0, cap_range=(200.0, 1400.0), fid_range=(0.96, 0.99)) -> Topology:
    kind, _, rest = spec.partition(":")
    if kind == "pa":
        n, m = rest.split(":")
        topo = gen_preferential_attachment(int(n), int(m), seed)
    elif kind == "er":
        n, p = rest.split(":")
        topo = gen_erdos_renyi(int(n), float(p), seed)
    elif kind in ("file", "gml"):
        with open(rest) as fh:
            text = fh.read()
        topo = load_topology(text) if kind == "file" else load_gml(text)
        if topo.has_parameters:
            return topo
    else:
        raise ConfigError(f"unknown topology spec {spec!r}")
    return assign_link_params(topo, tuple(cap_range), tuple(fid_range), seed)


def workload_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


@lru_cache(maxsize=4)
def _topology_for(cfg_json: str) -> Topology:
    cfg = ExperimentConfig(**json.loads(cfg_json))
    return make_topology(cfg.topology, cfg.topology_seed, cfg.cap_range, cfg.fid_range)


def network_capacity(cfg: ExperimentConfig) -> float:
    topo = _topology_for(cfg.provenance())
    return topology_capacity(
        topo, cfg.capacity_threshold, n_sets=cfg.capacity_sets, pairs_per_set=cfg.n_pairs,
        seed=cfg.seed, backend=cfg.backend,
    )


# -- metrics -----------------------------------------------------------------


def metric_satisfied(records) -> float:
    """Fraction of runs whose demands were met in every interval."""
    records = list(records)
    if not records:
        return 0.0
    return sum(1 for r in records if r["satisfied"]) / len(records)


def metric_utilization(sch: AllocationSchedule, s: Scenario) -> float | None:
    """Mean over storage nodes of the peak stored pairs as a percent of capacity."""
    per = []
    for node, members in s.storage_members.items():
        cap = s.storage.capacity[node]
        peak = max(
            (sum(float(sch.inventory[j][p, t].sum()) for j, p in members) for t in range(s.n_intervals)),
            default=0.0,
        )
        if cap <= 0:
            log.warning("storage node %r has zero capacity; utilisation taken as 0", node)
            per.append(0.0)
        else:
            per.append(min(100.0, 100.0 * peak / cap))
    return float(np.mean(per)) if per else None


def metric_delay(sch: AllocationSchedule, s: Scenario) -> float | None:
    """Flow-weighted mean swap count over user paths; None without flow."""
    num = den = 0.0
    for k, arr in enumerate(sch.user_rates):
        for p, path in enumerate(s.user_paths[k]):
            flow = float(arr[p].sum())
            num += flow * path.hop_count
            den += flow
    return num / den if den > 1e-12 else None


def edge_sharing(sch: AllocationSchedule, s: Scenario, tol: float = 1e-9) -> float | None:
    """Mean number of distinct user pairs whose carried flow crosses an edge."""
    users: dict = {}
    for k, arr in enumerate(sch.user_rates):
        for p, path in enumerate(s.user_paths[k]):
            if arr[p].max(initial=0.0) <= tol:
                continue
            for e in expand_path(s.vg, path).physical_links():
                users.setdefault(e, set()).add(k)
    return float(np.mean([len(v) for v in users.values()])) if users else None


# -- runs --------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(round(v, 9)) if math.isfinite(v) else repr(v)
    return str(v)


def run_one(
    cfg: ExperimentConfig, threshold: float, count: int, w: int, capacity: float, export_lp: str | None = None
) -> dict:
    """Solve one sweep point for one workload; failures become records."""
    seed = workload_seed(cfg.seed, w)
    rec = {c: None for c in RUN_COLUMNS}
    rec.update(threshold=threshold, storage_count=count, workload=w, seed=seed, satisfied=False)
    try:
        topo = _topology_for(cfg.provenance())
        pairs = sample_user_pairs(topo, cfg.n_pairs, seed)
        dm = normalized_spike_workload(
            capacity, cfg.n_pairs, cfg.n_intervals, cfg.spikes_per_interval,
            seed=seed + 1, threshold=threshold, scale=cfg.demand_scale,
        )
        if cfg.weights == "random":
            weights = np.random.default_rng(seed + 2).random((cfg.n_pairs, cfg.n_intervals))
        else:
            weights = float(cfg.weights)  # type: ignore[arg-type]
        storage = select_storage(topo, count, cfg.scheme, cfg.seed, cfg.storage_capacity)
        vg = build_virtual_graph(topo, storage, cfg.paths_per_storage_pair)
        s = make_scenario(
            topo, storage, pairs, n_intervals=cfg.n_intervals, delta=cfg.delta,
            thresholds=dm.thresholds, lifetime=cfg.lifetime, demands=dm.demands, weights=weights,
            paths_per_pair=cfg.paths_per_pair, path_scheme=cfg.path_scheme, vg=vg,
        )
        res = solve_scenario(s, cfg.objective, cfg.policy, cfg.backend, export_lp)
        rec["status"] = res.status.value
        if res.status is Status.NUMERICALLY_UNSTABLE:
            rec["error"] = "numerically unstable"
        if res.schedule is not None:
            sch = res.schedule
            rec["objective"] = sch.objective
            rec["max_residual"] = res.report.max_residual  # type: ignore[union-attr]
            if not res.report.ok:  # type: ignore[union-attr]
                rec["error"] = f"schedule audit failed: {res.report.violations[0]}"  # type: ignore[union-attr]
            if res.replay is not None:
                rec["replay_shortfall"] = res.replay.shortfall
            rec["satisfied"] = cfg.objective != MAX_WEGR and res.feasible
            if cfg.objective == MAX_WEGR:
                rec["egr"] = sch.objective
            rec["mean_delay"] = metric_delay(sch, s)
            rec["utilization"] = metric_utilization(sch, s)
            rec["edge_sharing"] = edge_sharing(sch, s)
    except Exception as exc:  # recorded, never aborts the batch
        log.debug("run failed", exc_info=True)
        rec["status"] = "Error"
        rec["error"] = f"{type(exc).__name__}: {exc}"
    return rec


def _task(args):
    cfg_json, threshold, count, w, capacity, export = args
    return run_one(ExperimentConfig(**json.loads(cfg_json)), threshold, count, w, capacity, export)


@dataclass
class BatchResult:
    records: list[dict]
    files: list[str]
    capacity: float | None

    @property
    def failures(self) -> list[dict]:
        return [r for r in self.records if r["error"]]

    def points(self):
        """``(threshold, storage_count) -> records`` in sweep order."""
        out: dict = {}
        for r in self.records:
            out.setdefault((r["threshold"], r["storage_count"]), []).append(r)
        return out


def summarize(records: list[dict]) -> dict:
    def mean(key):
        vals = [r[key] for r in records if r[key] is not None and r["error"] is None]
        return float(np.mean(vals)) if vals else None

    return {
        "runs": len(records),
        "satisfied": metric_satisfied(records) if records else None,
        "objective": mean("objective"),
        "egr": mean("egr"),
        "mean_delay": mean("mean_delay"),
        "utilization": mean("utilization"),
        "edge_sharing": mean("edge_sharing"),
        "failures": sum(1 for r in records if r["error"]),
    }


def _header(cfg: ExperimentConfig) -> str:
    return f"# schema {SCHEMA}\n# master_seed {cfg.seed}\n# config {cfg.provenance()}\n"


def run_batch(
    cfg: ExperimentConfig, jobs: int = 1, write: bool = True, export_lp_dir: str | None = None
) -> BatchResult:
    """Run the whole sweep and (optionally) write its CSV files.

    With ``export_lp_dir`` the LP of workload 0 at every sweep point is
    written there in LP format.
    """
    cfg.validate()
    grid = [(f, c) for f in cfg.thresholds for c in cfg.storage_counts]
    capacity = network_capacity(cfg) if cfg.workloads and grid else None
    if export_lp_dir:
        os.makedirs(export_lp_dir, exist_ok=True)

    def export(f, c, w):
        if not export_lp_dir or w:
            return None
        return os.path.join(export_lp_dir, f"{cfg.objective}_F{f:g}_S{c}_w0.lp")

    tasks = [
        (cfg.provenance(), f, c, w, capacity, export(f, c, w))
        for f, c in grid
        for w in range(cfg.workloads)
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [_task(t) for t in tasks]
    records.sort(key=lambda r: (cfg.thresholds.index(r["threshold"]), cfg.storage_counts.index(r["storage_count"]), r["workload"]))
    result = BatchResult(records, [], capacity)
    if write:
        result.files = write_outputs(cfg, result)
    return result


def write_outputs(cfg: ExperimentConfig, result: BatchResult) -> list[str]:
    os.makedirs(cfg.out, exist_ok=True)
    files = []
    head = _header(cfg)
    summary_rows = []
    for (f, c), recs in result.points().items():
        name = os.path.join(cfg.out, f"{cfg.objective}_F{f:g}_S{c}.csv")
        with open(name, "w", newline="") as fh:
            fh.write(head)
            fh.write(",".join(RUN_COLUMNS) + "\n")
            for r in recs:
                fh.write(",".join(_fmt(r[k]).replace(",", ";") for k in RUN_COLUMNS) + "\n")
        files.append(name)
        summary_rows.append((f, c, summarize(recs)))
    name = os.path.join(cfg.out, f"{cfg.objective}_summary.csv")
    cols = ["runs", "satisfied", "objective", "egr", "mean_delay", "utilization", "edge_sharing", "failures"]
    with open(name, "w", newline="") as fh:
        fh.write(head)
        fh.write(f"# capacity {_fmt(result.capacity)}\n")
        fh.write(",".join(["threshold", "storage_count"] + cols) + "\n")
        for f, c, summ in summary_rows:
            fh.write(",".join([_fmt(f), _fmt(c)] + [_fmt(summ[k]) for k in cols]) + "\n")
    files.append(name)
    return files


__all__ = [
    "BatchResult",
    "ConfigError",
    "ExperimentConfig",
    "edge_sharing",
    "make_topology",
    "metric_delay",
    "metric_satisfied",
    "metric_utilization",
    "run_batch",
    "run_one",
    "summarize",
    "workload_seed",
]
