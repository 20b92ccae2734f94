"""Physical network graphs, storage selection and hop-count path enumeration.

Text format (one statement per line, ``#`` starts a comment)::

    node <id>
    edge <u> <v> [capacity] [fidelity]

Node ids are integers when every id parses as one, strings otherwise.
Edges are undirected and carry a single capacity shared by both directions.
"""

from __future__ import annotations

import heapq
import itertools
import math
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, Iterator, Mapping, Sequence

import networkx as nx
import numpy as np

Node = Hashable


class TopologyError(ValueError):
    """Invalid topology input; ``code`` identifies the failure kind."""

    def __init__(self, code: str, message: str):
        super().__init__(f"[{code}] {message}")
        self.code = code


MALFORMED = "malformed"
SELF_LOOP = "self_loop"
DUPLICATE_EDGE = "duplicate_edge"
DISCONNECTED = "disconnected"
UNKNOWN_NODE = "unknown_node"
TOO_SMALL = "too_small"
BAD_PARAMETER = "bad_parameter"


def edge_key(u: Node, v: Node) -> tuple[Node, Node]:
    return (u, v) if _sort_key(u) <= _sort_key(v) else (v, u)


def _sort_key(node: Node) -> tuple[str, Any]:
    # ints before strings; never compares an int with a str
    return (type(node).__name__ != "int", node)


def sorted_nodes(nodes: Iterable[Node]) -> list[Node]:
    return sorted(nodes, key=_sort_key)


@dataclass(frozen=True)
class Edge:
    u: Node
    v: Node
    capacity: float | None = None
    fidelity: float | None = None

    @property
    def key(self) -> tuple[Node, Node]:
        return edge_key(self.u, self.v)


@dataclass(frozen=True)
class Topology:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    meta: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise TopologyError(MALFORMED, "duplicate node id")
        seen: set[tuple[Node, Node]] = set()
        for e in self.edges:
            if e.u == e.v:
                raise TopologyError(SELF_LOOP, f"self-loop at {e.u!r}")
            for x in (e.u, e.v):
                if x not in node_set:
                    raise TopologyError(UNKNOWN_NODE, f"edge endpoint {x!r} not declared")
            if e.key in seen:
                raise TopologyError(DUPLICATE_EDGE, f"duplicate edge {e.key!r}")
            seen.add(e.key)
            if e.capacity is not None and not (e.capacity > 0 and math.isfinite(e.capacity)):
                raise TopologyError(BAD_PARAMETER, f"capacity of {e.key!r} must be > 0")
            if e.fidelity is not None and not (0.25 < e.fidelity <= 1.0):
                raise TopologyError(BAD_PARAMETER, f"fidelity of {e.key!r} outside (0.25, 1]")
        adj: dict[Node, list[Node]] = {n: [] for n in self.nodes}
        lookup: dict[tuple[Node, Node], Edge] = {}
        for e in self.edges:
            adj[e.u].append(e.v)
            adj[e.v].append(e.u)
            lookup[e.key] = e
        object.__setattr__(
            self, "_adj", {n: tuple(sorted_nodes(nb)) for n, nb in adj.items()}
        )
        object.__setattr__(self, "_lookup", lookup)

    def neighbors(self, node: Node) -> tuple[Node, ...]:
        return self._adj[node]  # type: ignore[attr-defined]

    def degree(self, node: Node) -> int:
        return len(self.neighbors(node))

    def edge(self, u: Node, v: Node) -> Edge:
        try:
            return self._lookup[edge_key(u, v)]  # type: ignore[attr-defined]
        except KeyError:
            raise KeyError(f"no edge between {u!r} and {v!r}") from None

    def has_edge(self, u: Node, v: Node) -> bool:
        return edge_key(u, v) in self._lookup  # type: ignore[attr-defined]

    @property
    def has_parameters(self) -> bool:
        return all(e.capacity is not None and e.fidelity is not None for e in self.edges)

    def is_connected(self) -> bool:
        if not self.nodes:
            return False
        start = self.nodes[0]
        seen = {start}
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for y in self.neighbors(x):
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        return len(seen) == len(self.nodes)

    def bfs_distances(self, source: Node) -> dict[Node, int]:
        dist = {source: 0}
        queue = deque([source])
        while queue:
            x = queue.popleft()
            for y in self.neighbors(x):
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        return dist

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        for e in self.edges:
            g.add_edge(e.u, e.v, capacity=e.capacity, fidelity=e.fidelity)
        return g

    def to_text(self) -> str:
        lines = [f"# {k}: {v}" for k, v in sorted(self.meta.items())]
        lines += [f"node {n}" for n in self.nodes]
        for e in self.edges:
            parts = ["edge", str(e.u), str(e.v)]
            if e.capacity is not None:
                parts.append(repr(float(e.capacity)))
                if e.fidelity is not None:
                    parts.append(repr(float(e.fidelity)))
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"


def _from_graph(graph: nx.Graph, meta: Mapping[str, Any]) -> Topology:
    nodes = tuple(sorted_nodes(graph.nodes))
    keys = sorted(
        (edge_key(u, v) for u, v in graph.edges),
        key=lambda e: (_sort_key(e[0]), _sort_key(e[1])),
    )
    return Topology(nodes, tuple(Edge(u, v) for u, v in keys), dict(meta))


def _coerce_ids(tokens: list[str]) -> dict[str, Node]:
    try:
        return {t: int(t) for t in tokens}
    except ValueError:
        return {t: t for t in tokens}


def load_topology(source: str, require_connected: bool = True) -> Topology:
    """Parse the line-oriented text format.

    Raises:
        TopologyError: with code ``malformed``, ``self_loop``,
            ``duplicate_edge``, ``disconnected``, ``unknown_node`` or
            ``too_small``.
    """
    node_tokens: list[str] = []
    edge_rows: list[tuple[str, str, float | None, float | None]] = []
    for lineno, raw in enumerate(source.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0].lower()
        if kind == "node" and len(parts) == 2:
            node_tokens.append(parts[1])
        elif kind == "edge" and 3 <= len(parts) <= 5:
            try:
                cap = float(parts[3]) if len(parts) > 3 else None
                fid = float(parts[4]) if len(parts) > 4 else None
            except ValueError:
                raise TopologyError(MALFORMED, f"line {lineno}: bad number in {raw!r}") from None
            edge_rows.append((parts[1], parts[2], cap, fid))
        else:
            raise TopologyError(MALFORMED, f"line {lineno}: cannot parse {raw!r}")
    # edges may introduce nodes that were not declared explicitly
    declared = list(dict.fromkeys(node_tokens))
    if len(declared) != len(node_tokens):
        raise TopologyError(MALFORMED, "node declared twice")
    for u, v, _, _ in edge_rows:
        for x in (u, v):
            if x not in declared:
                declared.append(x)
    ids = _coerce_ids(declared)
    if len(declared) < 2:
        raise TopologyError(TOO_SMALL, "a topology needs at least two nodes")
    edges = tuple(Edge(ids[u], ids[v], cap, fid) for u, v, cap, fid in edge_rows)
    topo = Topology(tuple(ids[t] for t in declared), edges, {"source": "text"})
    if require_connected and not topo.is_connected():
        raise TopologyError(DISCONNECTED, "topology is not connected")
    return topo


def load_gml(source: str, require_connected: bool = True) -> Topology:
    """Import node ids and edges from an Internet Topology Zoo style GML file.

    Parallel edges and self-loops present in Zoo files are dropped; link
    parameters are assigned separately.
    """
    try:
        try:
            graph = nx.parse_gml(source, label="id")
        except nx.NetworkXError as exc:
            if "duplicated" not in str(exc):
                raise
            # repeated edges without a multigraph declaration
            graph = nx.parse_gml(re.sub(r"graph\s*\[", "graph [ multigraph 1", source, count=1), label="id")
    except (nx.NetworkXError, ValueError) as exc:
        raise TopologyError(MALFORMED, f"GML parse failed: {exc}") from None
    simple = nx.Graph()
    simple.add_nodes_from(graph.nodes)
    simple.add_edges_from((u, v) for u, v in graph.edges() if u != v)
    if simple.number_of_nodes() < 2:
        raise TopologyError(TOO_SMALL, "a topology needs at least two nodes")
    topo = _from_graph(simple, {"source": "gml"})
    if require_connected and not topo.is_connected():
        raise TopologyError(DISCONNECTED, "topology is not connected")
    return topo


def gen_erdos_renyi(n: int, p: float, seed: int) -> Topology:
    """G(n, p); a disconnected draw is redrawn with ``seed + 1``, and so on."""
    if n < 2 or not (0 < p <= 1):
        raise ValueError(f"need n >= 2 and 0 < p <= 1, got n={n}, p={p}")
    s = seed
    while True:
        graph = nx.gnp_random_graph(n, p, seed=s)
        if nx.is_connected(graph):
            break
        s += 1
    return _from_graph(
        graph,
        {"generator": f"G({n},{p})", "seed": seed, "seed_used": s, "resamples": s - seed},
    )


def gen_preferential_attachment(n: int, m: int, seed: int) -> Topology:
    """Barabasi-Albert growth; networkx seeds it with a star on ``m + 1`` nodes."""
    if not (1 <= m < n):
        raise ValueError(f"need 1 <= m < n, got n={n}, m={m}")
    graph = nx.barabasi_albert_graph(n, m, seed=seed)
    return _from_graph(graph, {"generator": f"PA({n},{m})", "seed": seed})


def assign_link_params(
    topo: Topology,
    cap_range: Sequence[float] = (200.0, 1400.0),
    fid_range: Sequence[float] = (0.96, 0.99),
    seed: int = 0,
) -> Topology:
    """Draw every edge's capacity and fidelity uniformly from the given ranges."""
    clo, chi = map(float, cap_range)
    flo, fhi = map(float, fid_range)
    if not (0 < clo <= chi):
        raise TopologyError(BAD_PARAMETER, f"capacity range {cap_range!r} invalid")
    if not (0.25 < flo <= fhi <= 1.0):
        raise TopologyError(BAD_PARAMETER, f"fidelity range {fid_range!r} invalid")
    rng = np.random.default_rng(seed)
    caps = rng.uniform(clo, chi, size=len(topo.edges)) if chi > clo else np.full(len(topo.edges), clo)
    fids = rng.uniform(flo, fhi, size=len(topo.edges)) if fhi > flo else np.full(len(topo.edges), flo)
    edges = tuple(
        Edge(e.u, e.v, float(c), float(f)) for e, c, f in zip(topo.edges, caps, fids)
    )
    meta = dict(topo.meta)
    meta["link_params_seed"] = seed
    return Topology(topo.nodes, edges, meta)


@dataclass(frozen=True)
class StorageConfig:
    storage_nodes: tuple[Node, ...]
    capacity: Mapping[Node, int]
    pairs: tuple[tuple[Node, Node], ...]

    @classmethod
    def complete(cls, nodes: Sequence[Node], capacity: int | Mapping[Node, int] = 12000) -> "StorageConfig":
        """Storage nodes with every unordered pair of them as a storage pair."""
        nodes = tuple(nodes)
        if isinstance(capacity, Mapping):
            caps = {s: int(capacity[s]) for s in nodes}
        else:
            caps = {s: int(capacity) for s in nodes}
        ordered = sorted_nodes(nodes)
        pairs = tuple(edge_key(a, b) for a, b in itertools.combinations(ordered, 2))
        return cls(nodes, caps, pairs)

    def __post_init__(self) -> None:
        if len(set(self.storage_nodes)) != len(self.storage_nodes):
            raise ValueError("duplicate storage node")
        for s in self.storage_nodes:
            if self.capacity.get(s, -1) < 0:
                raise ValueError(f"storage capacity of {s!r} must be >= 0")
        members = set(self.storage_nodes)
        for a, b in self.pairs:
            if a not in members or b not in members or a == b:
                raise ValueError(f"storage pair {(a, b)!r} not drawn from storage nodes")

    def validate_against(self, topo: Topology) -> None:
        missing = set(self.storage_nodes) - set(topo.nodes)
        if missing:
            raise ValueError(f"storage nodes {sorted_nodes(missing)!r} not in topology")


def select_storage(
    topo: Topology, count: int, scheme: str = "Degree", seed: int = 0, capacity: int = 12000
) -> StorageConfig:
    """Pick ``count`` storage nodes.

    ``Degree`` takes the highest-degree nodes, ties to the smaller node id.
    ``Random`` takes a prefix of a seeded permutation, so smaller counts are
    always subsets of larger ones under the same seed.
    """
    if not (0 <= count <= len(topo.nodes)):
        raise ValueError(f"storage count {count} outside [0, {len(topo.nodes)}]")
    scheme_l = scheme.lower()
    if scheme_l == "degree":
        ranked = sorted(topo.nodes, key=lambda n: (-topo.degree(n), _sort_key(n)))
        chosen = ranked[:count]
    elif scheme_l == "random":
        base = sorted_nodes(topo.nodes)
        order = np.random.default_rng(seed).permutation(len(base))
        chosen = [base[i] for i in order[:count]]
    else:
        raise ValueError(f"unknown storage selection scheme {scheme!r}")
    return StorageConfig.complete(chosen, capacity)


@dataclass(frozen=True)
class Path:
    """Node sequence plus one link identity per hop.

    A hop id of ``None`` is a physical edge; an integer names a virtual link.
    """

    nodes: tuple[Node, ...]
    hops: tuple[int | None, ...] = ()

    def __post_init__(self) -> None:
        if len(self.nodes) < 2:
            raise ValueError("a path has at least two nodes")
        if not self.hops:
            object.__setattr__(self, "hops", (None,) * (len(self.nodes) - 1))
        elif len(self.hops) != len(self.nodes) - 1:
            raise ValueError("one hop id per consecutive node pair")

    @property
    def hop_count(self) -> int:
        return len(self.nodes) - 1

    @property
    def is_virtual(self) -> bool:
        return any(h is not None for h in self.hops)

    @property
    def virtual_hops(self) -> tuple[int, ...]:
        return tuple(h for h in self.hops if h is not None)

    def links(self) -> Iterator[tuple[Node, Node, int | None]]:
        for i, h in enumerate(self.hops):
            yield self.nodes[i], self.nodes[i + 1], h

    def physical_links(self) -> Iterator[tuple[Node, Node]]:
        for u, v, h in self.links():
            if h is None:
                yield edge_key(u, v)

    def reversed(self) -> "Path":
        return Path(self.nodes[::-1], self.hops[::-1])

    def sort_key(self) -> tuple:
        return (
            self.hop_count,
            tuple(_sort_key(n) for n in self.nodes),
            tuple(-1 if h is None else h for h in self.hops),
        )

    def __str__(self) -> str:
        out = [str(self.nodes[0])]
        for (_, v, h) in self.links():
            out.append("-" if h is None else f"=[{h}]=")
            out.append(str(v))
        return "".join(out)


def _lex_shortest(
    topo: Topology, src: Node, dst: Node, banned_nodes: set[Node], banned_edges: set[tuple[Node, Node]]
) -> list[Node] | None:
    """Hop-shortest path, lexicographically smallest among ties."""
    dist = {dst: 0}
    queue = deque([dst])
    while queue:
        x = queue.popleft()
        for y in topo.neighbors(x):
            if y in dist or y in banned_nodes or edge_key(x, y) in banned_edges:
                continue
            dist[y] = dist[x] + 1
            queue.append(y)
    if src not in dist:
        return None
    path = [src]
    x = src
    while x != dst:
        step = [
            y
            for y in topo.neighbors(x)
            if dist.get(y) == dist[x] - 1 and edge_key(x, y) not in banned_edges
        ]
        x = min(step, key=_sort_key)
        path.append(x)
    return path


def k_shortest_paths(topo: Topology, src: Node, dst: Node, k: int) -> list[Path]:
    """Yen's loopless k-shortest paths by hop count, ties broken by node sequence."""
    if src == dst:
        raise ValueError("source and destination must differ")
    for x in (src, dst):
        if x not in topo._adj:  # type: ignore[attr-defined]
            raise KeyError(f"node {x!r} not in topology")
    if k <= 0:
        return []
    first = _lex_shortest(topo, src, dst, set(), set())
    if first is None:
        return []
    accepted: list[list[Node]] = [first]
    candidates: list[tuple[int, tuple, list[Node]]] = []
    seen = {tuple(first)}

    def key(p: list[Node]) -> tuple[int, tuple]:
        return (len(p) - 1, tuple(_sort_key(n) for n in p))

    while len(accepted) < k:
        last = accepted[-1]
        for i in range(len(last) - 1):
            spur = last[i]
            root = last[: i + 1]
            banned_edges = {
                edge_key(p[i], p[i + 1])
                for p in accepted
                if len(p) > i + 1 and p[: i + 1] == root
            }
            banned_nodes = set(root[:-1])
            tail = _lex_shortest(topo, spur, dst, banned_nodes, banned_edges)
            if tail is None:
                continue
            cand = root[:-1] + tail
            t = tuple(cand)
            if t not in seen:
                seen.add(t)
                heapq.heappush(candidates, (*key(cand), cand))
        if not candidates:
            break
        *_, best = heapq.heappop(candidates)
        accepted.append(best)
    return [Path(tuple(p)) for p in accepted]
