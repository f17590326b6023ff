import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from cpnet.mst import AxiomCheckFailed, log2ceil, phase_cap, run_cp_mst
from cpnet.oracles import kruskal_mst
from cpnet.topology import clique_network, ekey, from_edges, gen_cp, gen_GE, gen_lollipop


def nx_mst(net):
    g = nx.Graph()
    for (u, v), w in net.weights.items():
        g.add_edge(u, v, weight=w)
    return {ekey(u, v) for u, v in nx.minimum_spanning_edges(g, data=False)}


def test_triangle():
    net = from_edges(3, [(0, 1), (1, 2), (0, 2)], [0, 1, 2], {(0, 1): 1, (1, 2): 2, (0, 2): 3})
    assert run_cp_mst(net).edges == {(0, 1), (1, 2)}


def test_star_forced():
    edges = [(0, v) for v in range(1, 8)]
    net = from_edges(8, edges, [0], {e: 10 - i for i, e in enumerate(edges)})
    res = run_cp_mst(net, force=True)
    assert res.edges == set(edges)


def test_clique_only():
    net = clique_network(6).with_random_weights(2)
    assert run_cp_mst(net, seed=2).edges == nx_mst(net)


def test_ge_fixture():
    net = gen_GE(3)
    res = run_cp_mst(net, force=True)
    s, r = net.labels["s"], net.labels["r"]
    assert {ekey(s, x) for x in net.adj[s]} <= res.edges
    assert sum(1 for x in net.adj[r] if ekey(r, x) in res.edges) == 1
    ones = {e for e, w in net.weights.items() if w == 1 and not (net.in_core[e[0]] or net.in_core[e[1]])}
    assert ones <= res.edges
    assert res.edges == kruskal_mst(net.n, net.weights)


def test_precheck_gate():
    net = gen_lollipop(100).with_random_weights(0)
    with pytest.raises(AxiomCheckFailed):
        run_cp_mst(net)
    assert run_cp_mst(net, force=True).edges == nx_mst(net)


def test_needs_weights():
    with pytest.raises(ValueError):
        run_cp_mst(gen_cp(16))


def test_phase0_rounds():
    res = run_cp_mst(gen_cp(1024).with_random_weights(0))
    assert res.stats.phase0_rounds <= 8


def test_determinism():
    net = gen_cp(128, 4).with_random_weights(4)
    a, b = run_cp_mst(net, seed=4), run_cp_mst(net, seed=4)
    assert a.edges == b.edges and a.stats.row() == b.stats.row()
    assert a.engine.trace_csv() == b.engine.trace_csv()


def _components(n, edges):
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    return g


@settings(max_examples=12, deadline=None)
@given(st.integers(9, 300), st.integers(0, 10_000))
def test_matches_kruskal_and_invariants(n, seed):
    net = gen_cp(n, seed).with_random_weights(seed)
    res = run_cp_mst(net, seed=seed, record=True)
    assert res.edges == kruskal_mst(n, net.weights) == nx_mst(net)
    assert res.stats.phases <= phase_cap(n)
    assert not res.stats.diagnostics
    prev = set()
    for snap in res.stats.history:
        # committed edges stay a forest and each new one is some fragment's mwoe
        g = _components(n, snap.marked)
        assert nx.is_forest(g)
        assert snap.marked - prev <= set(snap.mwoe.values())
        prev = snap.marked
        # fragment growth, phases counted from 0, allowing one phase of lag: a
        # root with pending requests defers its release by a phase
        for f, size in snap.active.items():
            assert size >= min(2 ** max(snap.phase - 2, 0), n)
        # one request per (leader, merge target) in each exchange
        assert all(max(c.values(), default=0) <= 1 for c in snap.requests)
    # every fragment is a connected piece of the committed forest
    for snap, nxt in zip(res.stats.history, res.stats.history[1:]):
        g = _components(n, snap.marked)
        groups = {}
        for v, f in enumerate(nxt.frag):
            groups.setdefault(f, []).append(v)
        for vs in groups.values():
            assert nx.is_connected(g.subgraph(vs))
    # termination: a spanning tree
    assert len(res.edges) == n - 1 and nx.is_tree(_components(n, res.edges))


@pytest.mark.parametrize("n", [64, 256])
def test_edge_load_logarithmic(n):
    for seed in range(3):
        res = run_cp_mst(gen_cp(n, seed).with_random_weights(seed), seed=seed)
        assert res.stats.max_edge_load <= 4 * log2ceil(n)
