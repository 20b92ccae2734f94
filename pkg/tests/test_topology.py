import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bfs_distance
from qon.topology import (
    Edge,
    StorageConfig,
    Topology,
    TopologyError,
    assign_link_params,
    gen_erdos_renyi,
    gen_preferential_attachment,
    k_shortest_paths,
    load_gml,
    load_topology,
    select_storage,
)


def adjacency(topo):
    return {n: topo.neighbors(n) for n in topo.nodes}


# -- loading -----------------------------------------------------------------------


def test_minimal_graph():
    topo = load_topology("node a\nnode b\nedge a b 100 0.98\n")
    assert len(topo.nodes) == 2 and len(topo.edges) == 1
    e = topo.edge("b", "a")
    assert (e.capacity, e.fidelity) == (100.0, 0.98)


def test_numeric_ids_become_ints():
    topo = load_topology("edge 1 2\nedge 2 3\n")
    assert topo.nodes == (1, 2, 3)
    assert not topo.has_parameters


@pytest.mark.parametrize(
    "text, code",
    [
        ("node a\nnode b\nedge a b\nedge a a 1 0.9\n", "self_loop"),
        ("node a\nnode b\nedge a b\nedge b a\n", "duplicate_edge"),
        ("node a\nnode b\nnode c\nedge a b\n", "disconnected"),
        ("node a\nbogus line here\n", "malformed"),
        ("node a\nnode b\nedge a b x\n", "malformed"),
        ("node a\n", "too_small"),
        ("node a\nnode b\nedge a b 10 0.1\n", "bad_parameter"),
        ("node a\nnode b\nedge a b -5 0.9\n", "bad_parameter"),
    ],
)
def test_load_errors_have_distinct_codes(text, code):
    with pytest.raises(TopologyError) as err:
        load_topology(text)
    assert err.value.code == code


def test_text_round_trip():
    topo = assign_link_params(gen_preferential_attachment(12, 2, 5), seed=2)
    again = load_topology(topo.to_text())
    assert again.nodes == topo.nodes
    assert [(e.key, e.capacity, e.fidelity) for e in again.edges] == [
        (e.key, e.capacity, e.fidelity) for e in topo.edges
    ]


GML = """graph [
  node [ id 0 label "A" ]
  node [ id 1 label "B" ]
  node [ id 2 label "C" ]
  edge [ source 0 target 1 ]
  edge [ source 1 target 2 ]
  edge [ source 1 target 2 ]
  edge [ source 2 target 2 ]
]"""


def test_gml_subset_import():
    topo = load_gml(GML)
    assert topo.nodes == (0, 1, 2)
    assert [e.key for e in topo.edges] == [(0, 1), (1, 2)]


def test_gml_garbage_is_malformed():
    with pytest.raises(TopologyError) as err:
        load_gml("graph [ node [ id")
    assert err.value.code == "malformed"


# -- generators ----------------------------------------------------------------------


def test_er_forced_single_edge():
    topo = gen_erdos_renyi(2, 1.0, seed=123)
    assert len(topo.edges) == 1


@pytest.mark.parametrize("n,p,seed,lo,hi", [(50, 0.1, 7, 90, 160), (50, 0.05, 11, 45, 90)])
def test_er_edge_count_bands(n, p, seed, lo, hi):
    topo = gen_erdos_renyi(n, p, seed)
    assert topo.is_connected()
    assert lo <= len(topo.edges) <= hi
    assert topo.meta["seed_used"] == seed + topo.meta["resamples"]


def test_pa_small_tree():
    topo = gen_preferential_attachment(3, 1, seed=9)
    assert len(topo.edges) == 2 and topo.is_connected()


@pytest.mark.parametrize("m,lo,hi", [(2, 93, 97), (3, 138, 144)])
def test_pa_edge_count_bands(m, lo, hi):
    assert lo <= len(gen_preferential_attachment(50, m, 3).edges) <= hi


@pytest.mark.parametrize("bad", [(1, 0.5), (5, 0.0), (5, 1.5)])
def test_er_preconditions(bad):
    with pytest.raises(ValueError):
        gen_erdos_renyi(*bad, seed=0)


def test_pa_preconditions():
    with pytest.raises(ValueError):
        gen_preferential_attachment(3, 3, 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(5, 30), st.integers(0, 10_000))
def test_generators_deterministic(n, seed):
    assert gen_preferential_attachment(n, 2, seed).edges == gen_preferential_attachment(n, 2, seed).edges
    assert gen_erdos_renyi(n, 0.3, seed).edges == gen_erdos_renyi(n, 0.3, seed).edges


def test_link_params_ranges():
    topo = assign_link_params(gen_preferential_attachment(30, 2, 1), (200, 1400), (0.96, 0.99), seed=4)
    assert all(200 <= e.capacity <= 1400 and 0.96 <= e.fidelity <= 0.99 for e in topo.edges)
    fixed = assign_link_params(topo, (5, 5), (0.9, 0.9), seed=0)
    assert {e.capacity for e in fixed.edges} == {5.0}
    again = assign_link_params(gen_preferential_attachment(30, 2, 1), (200, 1400), (0.96, 0.99), seed=4)
    assert again.edges == topo.edges


def test_link_params_reject_bad_fidelity():
    with pytest.raises(TopologyError):
        assign_link_params(gen_preferential_attachment(5, 1, 0), fid_range=(0.1, 0.2))
    with pytest.raises(TopologyError):
        assign_link_params(gen_preferential_attachment(5, 1, 0), cap_range=(0, 3))


# -- storage selection ---------------------------------------------------------------


def star(n_leaves=4):
    return Topology(tuple(range(n_leaves + 1)), tuple(Edge(0, i) for i in range(1, n_leaves + 1)))


def test_no_storage():
    st_ = select_storage(star(), 0)
    assert st_.storage_nodes == () and st_.pairs == ()


def test_degree_picks_hub():
    assert select_storage(star(), 1).storage_nodes == (0,)


def test_degree_matches_sort_oracle():
    topo = gen_preferential_attachment(50, 2, 3)
    deg = nx.degree(topo.to_networkx())
    expected = sorted(topo.nodes, key=lambda n: (-deg[n], n))[:4]
    chosen = select_storage(topo, 4, "Degree")
    assert list(chosen.storage_nodes) == expected
    assert len(chosen.pairs) == 6


def test_degree_ties_go_to_smaller_id():
    assert select_storage(star(), 3).storage_nodes == (0, 1, 2)


def test_random_selection_is_seeded_and_nested():
    topo = gen_preferential_attachment(20, 2, 1)
    a = select_storage(topo, 5, "Random", seed=8)
    assert a.storage_nodes == select_storage(topo, 5, "Random", seed=8).storage_nodes
    assert select_storage(topo, 3, "Random", seed=8).storage_nodes == a.storage_nodes[:3]
    assert len(set(a.storage_nodes)) == 5


def test_storage_count_too_large():
    with pytest.raises(ValueError):
        select_storage(star(), 6)


def test_storage_config_validation():
    with pytest.raises(ValueError):
        StorageConfig.complete(["a"], capacity=-1)
    sc = StorageConfig.complete([0, 9])
    with pytest.raises(ValueError):
        sc.validate_against(star())


def test_degree_invariant_under_order_preserving_relabel():
    topo = gen_preferential_attachment(15, 2, 4)
    mapping = {n: 100 + 3 * n for n in topo.nodes}  # preserves id order
    relabeled = Topology(
        tuple(mapping[n] for n in topo.nodes), tuple(Edge(mapping[e.u], mapping[e.v]) for e in topo.edges)
    )
    chosen = select_storage(topo, 5).storage_nodes
    assert select_storage(relabeled, 5).storage_nodes == tuple(mapping[n] for n in chosen)


# -- k shortest paths ----------------------------------------------------------------


def test_line_single_path():
    topo = load_topology("edge a b\nedge b c\n")
    assert [p.nodes for p in k_shortest_paths(topo, "a", "c", 1)] == [("a", "b", "c")]


def test_cycle_two_paths_lexicographic():
    topo = load_topology("edge a b\nedge b c\nedge c d\nedge d a\n")
    paths = k_shortest_paths(topo, "a", "c", 2)
    assert [p.nodes for p in paths] == [("a", "b", "c"), ("a", "d", "c")]


def test_fewer_paths_than_requested():
    topo = load_topology("edge a b\nedge b c\n")
    assert len(k_shortest_paths(topo, "a", "c", 5)) == 1


def test_no_path_is_empty():
    topo = load_topology("edge a b\nedge c d\n", require_connected=False)
    assert k_shortest_paths(topo, "a", "d", 3) == []


def test_same_endpoints_rejected():
    with pytest.raises(ValueError):
        k_shortest_paths(star(), 1, 1, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 11), st.integers(0, 5000), st.integers(1, 6))
def test_yen_against_exhaustive_enumeration(n, seed, k):
    topo = gen_erdos_renyi(n, 0.4, seed)
    src, dst = topo.nodes[0], topo.nodes[-1]
    paths = k_shortest_paths(topo, src, dst, k)
    hops = [p.hop_count for p in paths]
    assert hops == sorted(hops)
    assert hops[0] == bfs_distance(adjacency(topo), src, dst)
    for p in paths:
        assert len(set(p.nodes)) == len(p.nodes)
        assert all(topo.has_edge(u, v) for u, v in zip(p.nodes, p.nodes[1:]))
    assert len({p.nodes for p in paths}) == len(paths)
    every = sorted(
        (len(q) - 1, tuple(q)) for q in nx.all_simple_paths(topo.to_networkx(), src, dst)
    )
    assert [(p.hop_count, p.nodes) for p in paths] == every[:k]
