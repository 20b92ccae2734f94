from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..fidelity import purification_cost
from ..overlay import VirtualGraph, build_virtual_graph, enumerate_user_paths, stored_path_fidelity
from ..topology import Node, Path, StorageConfig, Topology, edge_key


class ScenarioError(ValueError):
    pass


USER, STORAGE = "user", "storage"


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything one optimisation instance needs.

    ``user_paths[k]`` lists the physical paths of user pair ``k`` first
    (``n_physical_user_paths[k]`` of them) followed by its overlay paths.
    ``lifetime=None`` means pairs never expire.
    """

    vg: VirtualGraph
    user_pairs: tuple[tuple[Node, Node], ...]
    user_paths: tuple[tuple[Path, ...], ...]
    n_physical_user_paths: tuple[int, ...]
    n_intervals: int
    delta: float
    thresholds: np.ndarray
    lifetime: int | None = None
    demands: np.ndarray | None = None
    weights: np.ndarray | None = None
    periodic: bool = False
    retwirl: bool = False
    _derived: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        K, T = len(self.user_pairs), self.n_intervals
        if T < 1:
            raise ScenarioError("need at least one time interval")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ScenarioError("interval length must be > 0")
        if self.lifetime is not None and self.lifetime < 1:
            raise ScenarioError("storage lifetime must be >= 1")
        if len(self.user_paths) != K or len(self.n_physical_user_paths) != K:
            raise ScenarioError("one path registry per user pair")
        th = np.asarray(self.thresholds, dtype=float)
        if th.shape != (K, T):
            raise ScenarioError(f"thresholds shape {th.shape} != {(K, T)}")
        if np.any(th <= 0.25) or np.any(th > 1):
            raise ScenarioError("thresholds must lie in (0.25, 1]")
        for name in ("demands", "weights"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=float)
            if arr.shape != (K, T):
                raise ScenarioError(f"{name} shape {arr.shape} != {(K, T)}")
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ScenarioError(f"{name} must be finite and >= 0")
        if not self.vg.topology.has_parameters:
            raise ScenarioError("every edge needs a capacity and a fidelity")
        if not self.vg.topology.is_connected():
            raise ScenarioError("topology is not connected")

    # -- derived structure -------------------------------------------------

    @property
    def topology(self) -> Topology:
        return self.vg.topology

    @property
    def storage(self) -> StorageConfig:
        return self.vg.storage

    @property
    def storage_pairs(self) -> tuple[tuple[Node, Node], ...]:
        return self.vg.storage.pairs

    def storage_paths(self, j: int) -> tuple[Path, ...]:
        return self.vg.storage_paths[self.storage_pairs[j]]

    @property
    def lifetime_mode(self) -> str:
        """``"inf"`` (h >= |T|), ``"h1"`` (h = 1) or ``"age"`` (in between)."""
        h = self.lifetime
        if h is None or h >= self.n_intervals:
            return "inf"
        if h == 1:
            return "h1"
        return "age"

    def with_(self, **changes) -> "Scenario":
        from dataclasses import replace

        K, T = len(self.user_pairs), changes.get("n_intervals", self.n_intervals)
        for name in ("thresholds", "demands", "weights"):
            if changes.get(name) is not None:
                changes[name] = _grid(changes[name], K, T, name)
        return replace(self, **changes)

    def _cache(self, key, fn):
        if key not in self._derived:
            self._derived[key] = fn()
        return self._derived[key]

    def path_fidelity(self, k: int, p: int) -> float:
        return self._cache(("fid", k, p), lambda: stored_path_fidelity(self.vg, self.user_paths[k][p]))

    def cost(self, kind: str, owner: int, p: int, t: int) -> float:
        """Purification factor ``g`` of a path at interval ``t``.

        Storage pairs never purify, so their paths cost 1; an unreachable
        target gives ``inf`` and the path is unusable in that interval.
        """
        if kind == STORAGE:
            return 1.0
        return purification_cost(
            self.path_fidelity(owner, p), float(self.thresholds[owner, t]), self.retwirl
        )

    def usable(self, kind: str, owner: int, p: int, t: int) -> bool:
        return math.isfinite(self.cost(kind, owner, p, t))

    def paths_of(self, kind: str, owner: int) -> tuple[Path, ...]:
        return self.user_paths[owner] if kind == USER else self.storage_paths(owner)

    def all_paths(self):
        """Yield ``(kind, owner, path_index, path)`` for every registered path."""
        for k, paths in enumerate(self.user_paths):
            for p, path in enumerate(paths):
                yield USER, k, p, path
        for j in range(len(self.storage_pairs)):
            for p, path in enumerate(self.storage_paths(j)):
                yield STORAGE, j, p, path

    @property
    def consumers(self) -> dict[tuple[int, int], list[tuple[str, int, int]]]:
        """Inventory ``(j, p_s)`` -> paths that traverse its virtual link.

        A path consumes from ``(j, p_s)`` exactly when one of its hops is the
        virtual link generated by ``p_s``; storage pair ``j``'s own paths
        never consume from ``j``.
        """

        def build():
            out: dict[tuple[int, int], list[tuple[str, int, int]]] = {}
            for j in range(len(self.storage_pairs)):
                for p in range(len(self.storage_paths(j))):
                    out[(j, p)] = []
            for kind, owner, p, path in self.all_paths():
                for lid in path.virtual_hops:
                    link = self.vg.link(lid)
                    if kind == STORAGE and link.pair_index == owner:
                        raise ScenarioError("a storage pair cannot consume its own inventory")
                    out[(link.pair_index, link.path_index)].append((kind, owner, p))
            return out

        return self._cache("consumers", build)

    @property
    def edge_users(self) -> dict[tuple[Node, Node], list[tuple[str, int, int]]]:
        """Physical edge -> paths using it as a physical hop."""

        def build():
            out: dict[tuple[Node, Node], list[tuple[str, int, int]]] = {
                e.key: [] for e in self.topology.edges
            }
            for kind, owner, p, path in self.all_paths():
                for e in path.physical_links():
                    out[e].append((kind, owner, p))
            return out

        return self._cache("edge_users", build)

    @property
    def storage_members(self) -> dict[Node, list[tuple[int, int]]]:
        """Storage node -> inventories ``(j, p_s)`` it holds one end of."""

        def build():
            out: dict[Node, list[tuple[int, int]]] = {s: [] for s in self.storage.storage_nodes}
            for j, pair in enumerate(self.storage_pairs):
                for p in range(len(self.storage_paths(j))):
                    for s in pair:
                        out[s].append((j, p))
            return out

        return self._cache("members", build)


def _grid(value, K: int, T: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full((K, T), float(arr))
    if arr.shape == (K,):
        return np.repeat(arr[:, None], T, axis=1)
    if arr.shape != (K, T):
        raise ScenarioError(f"{name} must be scalar, per-pair or per-pair-per-interval")
    return arr


def make_scenario(
    topology: Topology,
    storage: StorageConfig,
    user_pairs: Sequence[tuple[Node, Node]],
    *,
    n_intervals: int = 10,
    delta: float = 20.0,
    thresholds=0.8,
    lifetime: int | None = None,
    demands=None,
    weights=None,
    paths_per_pair: int = 1,
    paths_per_storage_pair: int = 1,
    relay_paths_per_storage_pair: int = 0,
    path_scheme: str = "access",
    max_virtual_paths: int | None = None,
    periodic: bool = False,
    retwirl: bool = False,
    vg: VirtualGraph | None = None,
) -> Scenario:
    """Build the overlay graph, enumerate paths and assemble a :class:`Scenario`."""
    if not topology.is_connected():
        raise ScenarioError("topology is not connected")
    if vg is None:
        vg = build_virtual_graph(
            topology, storage, paths_per_storage_pair, relay_paths_per_storage_pair
        )
    pairs = tuple(tuple(p) for p in user_pairs)
    for a, b in pairs:
        if a == b:
            raise ScenarioError(f"user pair ({a!r}, {b!r}) has identical endpoints")
    K, T = len(pairs), int(n_intervals)
    registries = []
    n_phys = []
    for pair in pairs:
        pn, ps = enumerate_user_paths(
            vg, pair, paths_per_pair, max_virtual_paths=max_virtual_paths, scheme=path_scheme
        )
        registries.append(tuple(pn) + tuple(ps))
        n_phys.append(len(pn))
    return Scenario(
        vg=vg,
        user_pairs=pairs,
        user_paths=tuple(registries),
        n_physical_user_paths=tuple(n_phys),
        n_intervals=T,
        delta=float(delta),
        thresholds=_grid(thresholds, K, T, "thresholds"),
        lifetime=lifetime,
        demands=None if demands is None else _grid(demands, K, T, "demands"),
        weights=None if weights is None else _grid(weights, K, T, "weights"),
        periodic=periodic,
        retwirl=retwirl,
    )


def storage_capacity(s: Scenario, node: Node) -> float:
    return float(s.storage.capacity[node])


def edge_capacity(s: Scenario, key: tuple[Node, Node]) -> float:
    cap = s.topology.edge(*key).capacity
    assert cap is not None
    return float(cap)


__all__ = [
    "Scenario",
    "ScenarioError",
    "USER",
    "STORAGE",
    "make_scenario",
    "edge_key",
    "storage_capacity",
    "edge_capacity",
]
