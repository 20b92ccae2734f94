"""Virtual overlay graph: parallel virtual links between storage pairs.

Every enumerated physical path between a storage pair becomes its own
virtual link, so two overlay paths with the same node sequence but
different underlying links are distinct.  Optionally a storage pair can
also be linked through virtual links of *other* storage pairs ("relay"
links, one level deep); their generators are overlay paths whose
expansion is physical and loopless.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .fidelity import swap_fidelity
from .topology import (
    Node,
    Path,
    StorageConfig,
    Topology,
    _lex_shortest,
    _sort_key,
    edge_key,
    k_shortest_paths,
)


class OverlayError(ValueError):
    pass


@dataclass(frozen=True)
class VirtualLink:
    id: int
    pair: tuple[Node, Node]
    generator: Path  # oriented pair[0] -> pair[1]
    pair_index: int
    path_index: int

    @property
    def is_relay(self) -> bool:
        return self.generator.is_virtual

    def oriented(self, start: Node) -> Path:
        if start == self.pair[0]:
            return self.generator
        if start == self.pair[1]:
            return self.generator.reversed()
        raise OverlayError(f"virtual link {self.id} does not touch {start!r}")


class VirtualGraph:
    """Physical topology plus virtual links and storage-pair path registries.

    Read-only after construction.
    """

    def __init__(
        self,
        topology: Topology,
        storage: StorageConfig,
        links: Iterable[VirtualLink],
        storage_paths: Mapping[tuple[Node, Node], tuple[Path, ...]],
        n_physical_storage_paths: Mapping[tuple[Node, Node], int],
    ):
        self.topology = topology
        self.storage = storage
        self.links: tuple[VirtualLink, ...] = tuple(links)
        self.storage_paths = dict(storage_paths)
        self.n_physical_storage_paths = dict(n_physical_storage_paths)
        self._by_id = {link.id: link for link in self.links}
        vadj: dict[Node, list[tuple[Node, int]]] = {n: [] for n in topology.nodes}
        for link in self.links:
            a, b = link.pair
            vadj[a].append((b, link.id))
            vadj[b].append((a, link.id))
        self._vadj = {n: tuple(sorted(v, key=lambda t: t[1])) for n, v in vadj.items()}
        self._fidelity_cache: dict[int, float] = {}

    def link(self, link_id: int) -> VirtualLink:
        try:
            return self._by_id[link_id]
        except KeyError:
            raise OverlayError(f"unknown virtual link {link_id}") from None

    def links_between(self, a: Node, b: Node) -> tuple[VirtualLink, ...]:
        key = edge_key(a, b)
        return tuple(link for link in self.links if link.pair == key)

    def virtual_neighbors(self, node: Node) -> tuple[tuple[Node, int], ...]:
        return self._vadj.get(node, ())

    def neighbors(self, node: Node) -> list[tuple[Node, int | None]]:
        out: list[tuple[Node, int | None]] = [(y, None) for y in self.topology.neighbors(node)]
        out.extend(self.virtual_neighbors(node))
        return out

    def storage_pair_paths(self, pair: tuple[Node, Node]) -> tuple[tuple[Path, ...], tuple[Path, ...]]:
        """``(P_N, P_S)`` of a storage pair."""
        paths = self.storage_paths[edge_key(*pair)]
        n = self.n_physical_storage_paths[edge_key(*pair)]
        return paths[:n], paths[n:]

    def link_fidelity(self, link_id: int) -> float:
        if link_id not in self._fidelity_cache:
            self._fidelity_cache[link_id] = stored_path_fidelity(self, self.link(link_id).generator)
        return self._fidelity_cache[link_id]


def expand_path(vg: VirtualGraph, path: Path) -> Path:
    """Replace every virtual hop by its generator until only physical edges remain."""
    nodes = [path.nodes[0]]
    for u, v, hop in path.links():
        if hop is None:
            if not vg.topology.has_edge(u, v):
                raise OverlayError(f"{u!r}-{v!r} is not a physical edge")
            nodes.append(v)
            continue
        link = vg.link(hop)
        if edge_key(u, v) != link.pair:
            raise OverlayError(f"virtual link {hop} does not join {u!r} and {v!r}")
        segment = expand_path(vg, link.oriented(u))
        nodes.extend(segment.nodes[1:])
    return Path(tuple(nodes))


def is_loopless(path: Path) -> bool:
    return len(set(path.nodes)) == len(path.nodes)


def service_delay(path: Path) -> int:
    """Entanglement swaps along ``path`` in the overlay graph (virtual hop = 1)."""
    return path.hop_count


def stored_path_fidelity(
    vg: VirtualGraph, path: Path, inventory_fidelities: Mapping[int, float] | None = None
) -> float:
    """Fold swaps over physical link fidelities and stored-pair fidelities.

    A virtual hop contributes the fidelity of the pairs held for that link:
    ``inventory_fidelities[link_id]`` when a mapping is given, otherwise the
    basic fidelity of the link's generator path.
    """
    fid: float | None = None
    for u, v, hop in path.links():
        if hop is None:
            f = vg.topology.edge(u, v).fidelity
            if f is None:
                raise OverlayError(f"edge {u!r}-{v!r} has no fidelity assigned")
        elif inventory_fidelities is not None:
            if hop not in inventory_fidelities:
                raise OverlayError(f"no inventory fidelity for virtual link {hop}")
            f = inventory_fidelities[hop]
        else:
            f = vg.link_fidelity(hop)
        fid = f if fid is None else swap_fidelity(fid, f)
    assert fid is not None
    return fid


def _layered_distances(
    vg: VirtualGraph, dst: Node, allowed: Callable[[int], bool]
) -> tuple[dict[Node, int], dict[Node, int]]:
    """Hops to ``dst`` using any links, and using at least one virtual link."""
    def nbrs(x: Node):
        for y in vg.topology.neighbors(x):
            yield y, None
        for y, lid in vg.virtual_neighbors(x):
            if allowed(lid):
                yield y, lid

    any_dist = {dst: 0}
    queue = deque([dst])
    while queue:
        x = queue.popleft()
        for y, _ in nbrs(x):
            if y not in any_dist:
                any_dist[y] = any_dist[x] + 1
                queue.append(y)
    virt: dict[Node, int] = {}
    heap: list[tuple[int, tuple, Node]] = []
    for x in vg.topology.nodes:
        best = None
        for y, lid in nbrs(x):
            if lid is not None and y in any_dist:
                cand = 1 + any_dist[y]
                best = cand if best is None else min(best, cand)
        if best is not None:
            heapq.heappush(heap, (best, _sort_key(x), x))
    while heap:
        d, _, x = heapq.heappop(heap)
        if x in virt:
            continue
        virt[x] = d
        for y in vg.topology.neighbors(x):
            if y not in virt:
                heapq.heappush(heap, (d + 1, _sort_key(y), y))
    return any_dist, virt


def enumerate_overlay_paths(
    vg: VirtualGraph,
    src: Node,
    dst: Node,
    limit: int,
    allowed: Callable[[int], bool] = lambda _: True,
) -> list[Path]:
    """Hop-shortest paths in the overlay graph that use >= 1 virtual link.

    Parallel virtual links are distinct edges.  Candidates whose physical
    expansion revisits a node are discarded.  Best-first search with an
    exact layered lower bound, so paths come out ordered by
    ``Path.sort_key``.
    """
    if limit <= 0 or src == dst:
        return []
    any_dist, virt_dist = _layered_distances(vg, dst, allowed)
    if src not in virt_dist:
        return []

    def bound(node: Node, used: bool) -> int | None:
        return any_dist.get(node) if used else virt_dist.get(node)

    def key(nodes: tuple, hops: tuple, f: int) -> tuple:
        return (f, tuple(_sort_key(n) for n in nodes), tuple(-1 if h is None else h for h in hops))

    start = ((src,), (), frozenset([src]), False)
    heap = [(key((src,), (), bound(src, False)), start)]
    out: list[Path] = []
    while heap and len(out) < limit:
        _, (nodes, hops, expanded, used) = heapq.heappop(heap)
        x = nodes[-1]
        if x == dst:
            if used:
                out.append(Path(nodes, hops))
            continue
        for y, lid in vg.neighbors(x):
            if lid is not None and not allowed(lid):
                continue
            if lid is None:
                segment = (y,)
            else:
                segment = expand_path(vg, vg.link(lid).oriented(x)).nodes[1:]
            if expanded.intersection(segment) or len(set(segment)) != len(segment):
                continue
            now_used = used or lid is not None
            b = bound(y, now_used)
            if b is None:
                continue
            n2, h2 = nodes + (y,), hops + (lid,)
            heapq.heappush(
                heap,
                (key(n2, h2, len(h2) + b), (n2, h2, expanded.union(segment), now_used)),
            )
    return out


def build_virtual_graph(
    topo: Topology,
    storage: StorageConfig,
    paths_per_storage_pair: int = 1,
    relay_paths_per_storage_pair: int = 0,
) -> VirtualGraph:
    """Add one virtual link per enumerated path of every storage pair.

    With ``relay_paths_per_storage_pair > 0`` each storage pair also gets
    overlay paths through other pairs' (physical-generator) virtual links,
    and one more virtual link per such path.
    """
    if paths_per_storage_pair < 1:
        raise ValueError("paths_per_storage_pair must be >= 1")
    storage.validate_against(topo)
    links: list[VirtualLink] = []
    registry: dict[tuple[Node, Node], tuple[Path, ...]] = {}
    n_phys: dict[tuple[Node, Node], int] = {}
    for j, pair in enumerate(storage.pairs):
        paths = tuple(k_shortest_paths(topo, pair[0], pair[1], paths_per_storage_pair))
        registry[pair] = paths
        n_phys[pair] = len(paths)
        for i, p in enumerate(paths):
            links.append(VirtualLink(len(links), pair, p, j, i))
    if relay_paths_per_storage_pair > 0 and len(storage.pairs) > 1:
        base = VirtualGraph(topo, storage, links, registry, n_phys)
        relay: list[tuple[int, tuple[Node, Node], Path]] = []
        for j, pair in enumerate(storage.pairs):
            paths = enumerate_overlay_paths(
                base,
                pair[0],
                pair[1],
                relay_paths_per_storage_pair,
                allowed=lambda lid, pair=pair: base.link(lid).pair != pair,
            )
            registry[pair] = registry[pair] + tuple(paths)
            relay.extend((j, pair, p) for p in paths)
        for j, pair, p in relay:
            idx = registry[pair].index(p)
            links.append(VirtualLink(len(links), pair, p, j, idx))
    return VirtualGraph(topo, storage, links, registry, n_phys)


def _access_paths(vg: VirtualGraph, src: Node, dst: Node) -> list[Path]:
    """User -> storage node -> virtual link -> storage node -> user paths.

    The access legs are the single hop-shortest physical paths; this is the
    construction used for the evaluation topologies.
    """
    topo = vg.topology
    legs: dict[tuple[Node, Node], tuple[Node, ...] | None] = {}

    def leg(a: Node, b: Node) -> tuple[Node, ...] | None:
        if a == b:
            return (a,)
        if (a, b) not in legs:
            p = _lex_shortest(topo, a, b, set(), set())
            legs[(a, b)] = tuple(p) if p else None
        return legs[(a, b)]

    found: list[Path] = []
    for link in vg.links:
        for a, b in (link.pair, link.pair[::-1]):
            head, tail = leg(src, a), leg(b, dst)
            if head is None or tail is None:
                continue
            nodes = head + tail
            hops = (None,) * (len(head) - 1) + (link.id,) + (None,) * (len(tail) - 1)
            cand = Path(nodes, hops)
            if not is_loopless(cand) or not is_loopless(expand_path(vg, cand)):
                continue
            found.append(cand)
    found.sort(key=Path.sort_key)
    return found


def enumerate_user_paths(
    vg: VirtualGraph,
    pair: tuple[Node, Node],
    max_paths: int | None = 1,
    max_virtual_paths: int | None = None,
    scheme: str = "shortest",
) -> tuple[list[Path], list[Path]]:
    """``(P_N, P_S)`` for a user pair.

    Args:
        max_paths: cap on physical paths.
        max_virtual_paths: cap on overlay paths; defaults to ``max_paths``
            for ``scheme="shortest"`` and to no cap for ``"access"``.
        scheme: ``"shortest"`` enumerates hop-shortest overlay paths;
            ``"access"`` joins each storage node to the users by their
            shortest physical path, one overlay path per virtual link and
            orientation.
    """
    src, dst = pair
    for x in pair:
        if x not in vg.topology.nodes:
            raise OverlayError(f"user node {x!r} not in topology")
    phys = k_shortest_paths(vg.topology, src, dst, max_paths or 1)
    if scheme == "shortest":
        cap = max_paths if max_virtual_paths is None else max_virtual_paths
        virt = enumerate_overlay_paths(vg, src, dst, cap or 0)
    elif scheme == "access":
        virt = _access_paths(vg, src, dst)
        if max_virtual_paths is not None:
            virt = virt[:max_virtual_paths]
    else:
        raise ValueError(f"unknown overlay path scheme {scheme!r}")
    return phys, virt


def describe(vg: VirtualGraph, user_paths: Mapping[tuple, tuple[list[Path], list[Path]]] | None = None) -> str:
    """Human-readable dump of virtual links and path registries."""
    lines = [f"storage nodes: {' '.join(map(str, vg.storage.storage_nodes))}"]
    for link in vg.links:
        kind = "relay" if link.is_relay else "base"
        lines.append(
            f"vlink {link.id} {link.pair[0]} {link.pair[1]} {kind} generator={link.generator}"
            f" fidelity={vg.link_fidelity(link.id):.6f}"
        )
    for pair in vg.storage.pairs:
        pn, ps = vg.storage_pair_paths(pair)
        for p in pn:
            lines.append(f"storage {pair[0]} {pair[1]} N {p}")
        for p in ps:
            lines.append(f"storage {pair[0]} {pair[1]} S {p}")
    for pair, (pn, ps) in (user_paths or {}).items():
        for p in pn:
            lines.append(f"user {pair[0]} {pair[1]} N {p} delay={service_delay(p)}")
        for p in ps:
            lines.append(
                f"user {pair[0]} {pair[1]} S {p} delay={service_delay(p)}"
                f" expanded={expand_path(vg, p)}"
            )
    return "\n".join(lines) + "\n"


__all__ = [
    "OverlayError",
    "VirtualLink",
    "VirtualGraph",
    "build_virtual_graph",
    "enumerate_overlay_paths",
    "enumerate_user_paths",
    "expand_path",
    "is_loopless",
    "service_delay",
    "stored_path_fidelity",
    "describe",
]
