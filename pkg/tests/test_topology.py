import math

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from cpnet.topology import (NetworkFormatError, PartitionedNetwork, clique_network, diameter, from_edges,
                            from_spec, gen_cp, gen_dumbbell, gen_GB, gen_GC, gen_GE, gen_lollipop,
                            gen_sun, load_network, save_network)


def as_nx(net):
    g = nx.Graph()
    g.add_nodes_from(range(net.n))
    g.add_edges_from(net.edges())
    return g


def test_cp_36():
    net = gen_cp(36)
    assert net.n_C == 6 and net.core_is_clique
    for c in net.core:
        assert net.d_in(c) == 5 and net.d_out(c) == 5


def test_cp_9():
    net = gen_cp(9)
    assert net.n_C == 3
    assert all(net.d_out(c) == 2 for c in net.core)


def test_cp_1024():
    # frozen from networkx on the generated graph
    net = gen_cp(1024)
    assert net.n_C == 32 and net.m == 1488
    assert diameter(net) == nx.diameter(as_nx(net)) == 3


def test_lollipop():
    net = gen_lollipop(25)
    assert net.n_C == 5 and net.m == 10 + 20
    assert diameter(net) == 21
    small = gen_lollipop(4)
    assert small.n_C == 2 and small.m == 3


def test_sun():
    net = gen_sun(16)
    assert net.n_C == 8 and net.n_P == 8
    assert all(net.d_in(c) == 2 for c in net.core)
    assert all(len(net.core_neighbors(p)) == 1 for p in net.periphery)
    assert diameter(net) == 6


def test_dumbbell():
    net = gen_dumbbell(16)
    assert net.n_C == 2
    for c in net.core:
        assert net.d_in(c) == 1 and net.d_out(c) == 7
    for n in (6, 10, 64):
        assert diameter(gen_dumbbell(n)) == 3


def test_lower_bound_constructions():
    assert gen_GB(3).n == 3 + 3 * 27 + 1
    assert gen_GC(4).n == 4 + 4 * 2 + 8
    ge = gen_GE(3)
    # k^2 clique nodes, hub u, k^3 periphery nodes, s and r
    assert ge.n == 9 + 1 + 27 + 2
    s, r = ge.labels["s"], ge.labels["r"]
    assert {ge.weight(s, x) for x in ge.adj[s]} == {2}
    assert {ge.weight(r, x) for x in ge.adj[r]} == {3}


def test_clique_diameter():
    for k in (2, 5, 9):
        assert diameter(clique_network(k)) == 1


def test_text_roundtrip(tmp_path):
    net = gen_cp(50, 3).with_random_weights(3)
    path = tmp_path / "net.txt"
    save_network(net, path)
    back = load_network(path)
    assert back.n == net.n and back.core == net.core and back.adj == net.adj
    assert back.weights == net.weights


def test_bad_inputs():
    with pytest.raises(NetworkFormatError):
        from_edges(3, [(0, 1), (1, 0)], [0])
    with pytest.raises(NetworkFormatError):
        from_edges(3, [(1, 1)], [0])
    with pytest.raises(ValueError):
        from_spec("cp:x")
    with pytest.raises(ValueError):
        from_spec("nope:10")
    with pytest.raises(NetworkFormatError):
        PartitionedNetwork.from_text("3 1\n")


def test_random_weights_distinct_and_seeded():
    net = gen_cp(100, 2)
    w = net.with_random_weights(5).weights
    assert len(set(w.values())) == len(w) == net.m
    assert all(1 <= x <= 100 ** 4 for x in w.values())
    assert w == net.with_random_weights(5).weights
    assert w != net.with_random_weights(6).weights


@settings(max_examples=30, deadline=None)
@given(st.integers(64, 4096), st.integers(0, 10_000))
def test_cp_structure(n, seed):
    net = gen_cp(n, seed)
    assert math.sqrt(n) / 2 <= net.n_C <= 2 * math.sqrt(n)
    assert net.m <= 3 * n
    assert net.core_is_clique
    assert all(net.core_neighbors(p) for p in net.periphery)
    assert all(net.d_out(c) <= 2 * (net.d_in(c) + 1) for c in net.core)


@settings(max_examples=20, deadline=None)
@given(st.integers(9, 400), st.integers(0, 10_000))
def test_cp_diameter_matches_networkx(n, seed):
    net = gen_cp(n, seed)
    assert diameter(net, exhaustive=True) == nx.diameter(as_nx(net)) <= 3
