import pytest
from hypothesis import given, settings, strategies as st

from cpnet.engine import (CapacityViolation, Engine, Envelope, NonAdjacentSend, Payload,
                          PayloadOverflow, RoundLimitExceeded, node_rng, run_round, run_until)
from cpnet.mst import run_cp_mst
from cpnet.topology import clique_network, gen_cp, path_network


class Sender:
    """Sends a fixed list of envelopes in round 1, then halts."""

    def __init__(self, out):
        self.out = out

    def step(self, state, inbox, rnd, ctx):
        return (inbox, self.out if rnd == 1 else [], True)


class Flood:
    # state: (has the token, already forwarded it)
    def step(self, state, inbox, rnd, ctx):
        have, done = state or (False, False)
        have = have or bool(inbox)
        out = [Envelope(ctx.node, x, Payload("tok")) for x in ctx.neighbors] if have and not done else []
        return (have, have), out, False


def test_single_edge_delivery():
    net = path_network(2)
    eng = Engine(net)
    msg = Envelope(0, 1, Payload("m", (5,)))
    states, inbox, tr, _ = run_round(eng, {0: Sender([msg])}, {}, {})
    assert inbox[1] == [msg]
    assert tr.sent == 1 and eng.round == 1


def test_clique_all_to_all_one_round():
    net = clique_network(6)
    eng = Engine(net)
    beh = {v: Sender([Envelope(v, x, Payload("m", (v, x))) for x in range(6) if x != v]) for v in range(6)}
    _, inbox, tr, _ = run_round(eng, beh, {}, {})
    assert tr.sent == 30 and eng.round == 1
    assert all(len(inbox[v]) == 5 for v in range(6))


def test_two_envelopes_on_one_edge_rejected():
    eng = Engine(path_network(2))
    with pytest.raises(CapacityViolation):
        eng.deliver([Envelope(0, 1, Payload("a")), Envelope(0, 1, Payload("b"))])


def test_non_adjacent_and_overflow():
    eng = Engine(path_network(3))
    with pytest.raises(NonAdjacentSend):
        eng.deliver([Envelope(0, 2, Payload("a"))])
    with pytest.raises(PayloadOverflow):
        eng.deliver([Envelope(0, 1, Payload("a", tuple(range(7))))])
    with pytest.raises(PayloadOverflow):
        eng.deliver([Envelope(0, 1, Payload("a", (1 << 64,)))])
    with pytest.raises(PayloadOverflow):
        eng.deliver([Envelope(0, 1, Payload("a", (-1,)))])


def test_flood_takes_diameter_rounds():
    d = 9
    net = path_network(d + 1)
    eng = Engine(net)
    beh = {v: Flood() for v in range(net.n)}
    states, inbox = {0: (True, False)}, {}
    while d not in inbox:
        states, inbox, _, _ = run_round(eng, beh, states, inbox)
    assert eng.round == d


def test_round_limit():
    eng = Engine(path_network(3))
    beh = {v: Flood() for v in range(3)}
    with pytest.raises(RoundLimitExceeded):
        run_until(eng, beh, {}, stop=lambda s, r: False, round_limit=10)
    assert eng.round == 10


def test_engine_round_limit_counts_delivered_rounds():
    eng = Engine(path_network(2), round_limit=3)
    for _ in range(3):
        eng.deliver([])
    with pytest.raises(RoundLimitExceeded):
        eng.deliver([])


def test_mst_on_64_nodes_well_under_limit():
    net = gen_cp(64).with_random_weights(1)
    res = run_cp_mst(net, seed=1)
    assert res.stats.rounds < 10 * 6 * 6


def test_node_rng_streams_are_reproducible_and_distinct():
    a = node_rng(3, 5).integers(0, 1 << 62, size=4).tolist()
    assert a == node_rng(3, 5).integers(0, 1 << 62, size=4).tolist()
    assert a != node_rng(3, 6).integers(0, 1 << 62, size=4).tolist()
    assert a != node_rng(4, 5).integers(0, 1 << 62, size=4).tolist()


def _random_traffic(net, seed):
    eng = Engine(net, seed)
    rng = eng.rng("traffic")
    for _ in range(5):
        envs = []
        for u in range(net.n):
            for x in net.adj[u]:
                if rng.random() < 0.5:
                    envs.append(Envelope(u, x, Payload("t", (int(rng.integers(0, 1 << 63)),))))
        eng.deliver(envs)
    return eng


@settings(max_examples=25, deadline=None)
@given(st.integers(9, 60), st.integers(0, 1000))
def test_trace_is_deterministic(n, seed):
    net = gen_cp(n, seed)
    assert _random_traffic(net, seed).trace_csv() == _random_traffic(net, seed).trace_csv()


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(0, 1000))
def test_conservation(k, seed):
    """Everything sent in a round shows up in the next round's inboxes."""
    net = clique_network(k)
    eng = Engine(net, seed)
    rng = eng.rng(0)
    envs = [Envelope(u, x, Payload("t")) for u in range(k) for x in net.adj[u] if rng.random() < 0.6]
    inbox = eng.deliver(envs)
    assert sum(len(v) for v in inbox.values()) == len(envs) == eng.traces[-1].sent
