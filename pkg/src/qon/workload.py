"""Spike-model demand generation and capacity normalisation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .topology import Node, StorageConfig, Topology, sorted_nodes


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DemandMatrix:
    """Per-pair, per-interval demand (EPR/s) and fidelity threshold.

    ``spikes`` marks the entries drawn from the spike regime.
    """

    demands: np.ndarray
    thresholds: np.ndarray
    spikes: np.ndarray | None = None

    def __post_init__(self):
        d = np.asarray(self.demands, dtype=float)
        th = np.asarray(self.thresholds, dtype=float)
        if d.ndim != 2 or th.shape != d.shape:
            raise WorkloadError("demands and thresholds must share a |K| x |T| shape")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise WorkloadError("demands must be finite and >= 0")
        if np.any(th <= 0.25) or np.any(th > 1):
            raise WorkloadError("thresholds must lie in (0.25, 1]")
        object.__setattr__(self, "demands", d)
        object.__setattr__(self, "thresholds", th)

    @property
    def shape(self) -> tuple[int, int]:
        return self.demands.shape  # type: ignore[return-value]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["pair", "interval", "demand", "threshold"])
        K, T = self.shape
        for k in range(K):
            for t in range(T):
                wr.writerow([k, t, repr(float(self.demands[k, t])), repr(float(self.thresholds[k, t]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DemandMatrix":
        rows = list(csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#")))
        if not rows:
            raise WorkloadError("empty demand file")
        K = 1 + max(int(r["pair"]) for r in rows)
        T = 1 + max(int(r["interval"]) for r in rows)
        d = np.full((K, T), np.nan)
        th = np.full((K, T), np.nan)
        for r in rows:
            k, t = int(r["pair"]), int(r["interval"])
            d[k, t] = float(r["demand"])
            th[k, t] = float(r["threshold"])
        if np.isnan(d).any():
            raise WorkloadError("demand file leaves some (pair, interval) entries unset")
        return cls(d, th)


def spike_workload(
    n_pairs: int,
    n_intervals: int,
    spiking_per_interval: int,
    spike_mean: float,
    base_mean: float | None = None,
    seed: int = 0,
    threshold: float | Sequence[float] = 0.8,
) -> DemandMatrix:
    """Draw a spike-model demand matrix.

    Each interval picks ``spiking_per_interval`` pairs uniformly without
    replacement; their demand is exponential with mean ``spike_mean``.  The
    other pairs draw exponential background demand with mean ``base_mean``
    (``spike_mean / 10`` by default; 0 means no background).
    """
    if not 0 <= spiking_per_interval <= n_pairs:
        raise WorkloadError("spiking_per_interval must lie in [0, number of pairs]")
    if n_intervals < 1 or n_pairs < 0:
        raise WorkloadError("need at least one interval")
    if spike_mean < 0 or (base_mean is not None and base_mean < 0):
        raise WorkloadError("means must be >= 0")
    if base_mean is None:
        base_mean = spike_mean / 10.0
    rng = np.random.default_rng(seed)
    d = np.zeros((n_pairs, n_intervals))
    mask = np.zeros((n_pairs, n_intervals), dtype=bool)
    for t in range(n_intervals):
        chosen = rng.choice(n_pairs, size=spiking_per_interval, replace=False) if n_pairs else []
        mask[chosen, t] = True
        spikes = rng.exponential(spike_mean, n_pairs) if spike_mean > 0 else np.zeros(n_pairs)
        base = rng.exponential(base_mean, n_pairs) if base_mean > 0 else np.zeros(n_pairs)
        d[:, t] = np.where(mask[:, t], spikes, base)
    th = np.asarray(threshold, dtype=float)
    th = np.broadcast_to(th.reshape(-1, 1) if th.ndim == 1 else th, (n_pairs, n_intervals)).copy()
    return DemandMatrix(d, th, mask)


def sample_user_pairs(topology: Topology, n_pairs: int, seed: int = 0) -> list[tuple[Node, Node]]:
    """Distinct unordered node pairs drawn uniformly with a seeded generator."""
    nodes = sorted_nodes(topology.nodes)
    total = len(nodes) * (len(nodes) - 1) // 2
    if n_pairs > total:
        raise WorkloadError(f"only {total} distinct pairs available")
    rng = np.random.default_rng(seed)
    picked: list[tuple[Node, Node]] = []
    seen = set()
    while len(picked) < n_pairs:
        a, b = sorted(rng.choice(len(nodes), size=2, replace=False))
        if (a, b) in seen:
            continue
        seen.add((a, b))
        picked.append((nodes[a], nodes[b]))
    return picked


def topology_capacity(
    topology: Topology,
    threshold: float = 0.75,
    pairs: Sequence[tuple[Node, Node]] | None = None,
    n_sets: int = 5,
    pairs_per_set: int = 6,
    seed: int = 0,
    paths_per_pair: int = 1,
    backend: str = "simplex",
) -> float:
    """Mean maximum total EGR the network offers without storage.

    Solves the single-interval EGR maximisation with unit weights for
    ``n_sets`` seeded random sets of ``pairs_per_set`` user pairs (or once
    for ``pairs`` if given) and averages the optima.  Normalised spike
    workloads use ``capacity / spikes_per_interval`` as the spike mean.
    """
    from .formulation import MAX_WEGR, make_scenario, solve_scenario
    from .lp import Status

    sets = [list(pairs)] if pairs is not None else [
        sample_user_pairs(topology, pairs_per_set, seed + i) for i in range(n_sets)
    ]
    values = []
    for user_pairs in sets:
        s = make_scenario(
            topology,
            StorageConfig.complete([]),
            user_pairs,
            n_intervals=1,
            thresholds=threshold,
            weights=1.0,
            paths_per_pair=paths_per_pair,
        )
        res = solve_scenario(s, MAX_WEGR, backend=backend)
        if res.status is not Status.OPTIMAL:
            raise WorkloadError(f"capacity LP ended {res.status.value}")
        values.append(res.solution.objective)
    return float(np.mean(values))


def normalized_spike_workload(
    capacity: float,
    n_pairs: int,
    n_intervals: int,
    spiking_per_interval: int = 3,
    seed: int = 0,
    threshold: float = 0.8,
    scale: float = 1.0,
) -> DemandMatrix:
    """Spike workload whose spike mean is ``scale * capacity / spiking_per_interval``."""
    mean = scale * capacity / max(1, spiking_per_interval)
    return spike_workload(n_pairs, n_intervals, spiking_per_interval, mean, seed=seed, threshold=threshold)


__all__ = [
    "DemandMatrix",
    "WorkloadError",
    "normalized_spike_workload",
    "sample_user_pairs",
    "spike_workload",
    "topology_capacity",
]
