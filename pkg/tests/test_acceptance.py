"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line in the summary.

Run alone with `pytest tests/test_acceptance.py -v`.
"""
import math
from statistics import mean

import numpy as np
import pytest

from cpnet.aggregate import (distinct_count, median, mode, random_area_instance, random_values, rank,
                             topk_by_area)
from cpnet.axioms import check_all
from cpnet.cli import main
from cpnet.engine import Engine, Payload
from cpnet.matrix import mm, mt, random_sparse, random_vector, vmm
from cpnet.mst import log2ceil, run_cp_mst
from cpnet.oracles import (dense_mm, dense_transpose, dense_vmm, distinct_c, kruskal_mst, median_c, mode_c,
                           sort_ranks, topk_c)
from cpnet.services import send_msgs
from cpnet.topology import (clique_network, diameter, ekey, gen_cp, gen_dumbbell, gen_GE, gen_lollipop,
                            gen_sun)

MST_SIZES = (64, 256, 1024)
MST_SEEDS = 100
BIG_N = 4096
BIG_SEEDS = 20
# per-edge load constant c, frozen; the observed worst ratio is printed with the result
LOAD_C = 4


def _mst_runs(n, seeds):
    out = []
    for seed in range(seeds):
        net = gen_cp(n, seed).with_random_weights(seed)
        res = run_cp_mst(net, seed=seed)
        out.append((net, res))
    return out


@pytest.fixture(scope="module")
def mst_runs():
    return {n: _mst_runs(n, MST_SEEDS) for n in MST_SIZES}


@pytest.fixture(scope="module")
def big_mst_runs():
    return _mst_runs(BIG_N, BIG_SEEDS)


def test_c01_mst_equals_kruskal(mst_runs, detail):
    bad = [(n, i) for n, runs in mst_runs.items() for i, (net, res) in enumerate(runs)
           if res.edges != kruskal_mst(net.n, net.weights)]
    detail(f"{MST_SEEDS} seeds x n in {MST_SIZES}, mismatches: {len(bad)}")
    assert not bad


def test_c02_mst_phases(mst_runs, detail):
    worst = {n: max(res.stats.phases for _, res in runs) for n, runs in mst_runs.items()}
    cap = {n: 2 * log2ceil(n) + 4 for n in mst_runs}
    detail(f"max phases {worst} vs cap {cap}")
    assert all(worst[n] <= cap[n] for n in worst)


def test_c03_mst_round_growth(mst_runs, big_mst_runs, detail):
    means = {n: mean(res.stats.rounds for _, res in runs) for n, runs in mst_runs.items()}
    means[BIG_N] = mean(res.stats.rounds for _, res in big_mst_runs)
    norm = {n: r / log2ceil(n) ** 2 for n, r in means.items()}
    ratio = max(norm.values()) / min(norm.values())
    detail(f"mean rounds {({n: round(r, 1) for n, r in means.items()})}, "
           f"max/min of rounds/log2^2 = {ratio:.2f}")
    assert ratio <= 3


def test_c04_edge_load(mst_runs, detail):
    worst = 0.0
    for n, runs in mst_runs.items():
        for _, res in runs:
            worst = max(worst, max(res.stats.phase_loads) / log2ceil(n))
    detail(f"c = {LOAD_C}, observed max load / ceil(log2 n) = {worst:.2f}")
    assert LOAD_C <= 8 and worst <= LOAD_C


def test_c05_axiom_independence(detail):
    expect = ((gen_lollipop, {"A_C"}), (gen_sun, {"A_E"}), (gen_dumbbell, {"A_B"}))
    wrong = [(gen.__name__, n) for gen, fails in expect for n in (16, 25, 64, 100)
             if check_all(gen(n)).failures != fails]
    cp_bad = [n for n in range(9, 4097) if check_all(gen_cp(n)).failures]
    detail(f"fixture mismatches: {len(wrong)}, gen_cp failures over n=9..4096: {len(cp_bad)}")
    assert not wrong and not cp_bad


def _diameter_at_most_3(net):
    # clique core and a core neighbour for every periphery node: p - c - c' - q
    core = [v for v in range(net.n) if net.in_core[v]]
    clique = all(len(set(net.adj[c]) & set(core)) == len(core) - 1 for c in core)
    anchored = all(any(net.in_core[u] for u in net.adj[v]) for v in range(net.n) if not net.in_core[v])
    return clique and anchored


def test_c06_structural_bounds(detail):
    bad = []
    for n in range(64, 4097):
        net = gen_cp(n)
        root = math.sqrt(n)
        if not (root / 2 <= net.n_C <= 2 * root and net.m <= 3 * n and _diameter_at_most_3(net)):
            bad.append(n)
    # the certificate is checked against the exact diameter on a spread of sizes
    sample = sorted(set(range(64, 4097, 251)) | {64, 256, 1024, 4096})
    exact = {n: diameter(gen_cp(n)) for n in sample}
    detail(f"violations over n=64..4096: {len(bad)}, exact diameter on {len(sample)} sizes: "
           f"max {max(exact.values())}")
    assert not bad and max(exact.values()) <= 3


def test_c07_matrix_exactness(detail):
    n = 256
    net = gen_cp(n)
    bad = []
    for k in (2, 4, 8):
        for seed in range(20):
            a, b = random_sparse(n, k, seed), random_sparse(n, k, seed + 1)
            s = random_vector(n, seed)
            if mt(net, a, k, seed=seed).result != dense_transpose(a, n):
                bad.append(("mt", k, seed))
            if vmm(net, s, a, k, seed=seed).result != dense_vmm(s, a, n):
                bad.append(("vmm", k, seed))
            if mm(net, a, b, k, seed=seed).result != dense_mm(a, b, n):
                bad.append(("mm", k, seed))
    detail(f"20 seeds x k in (2, 4, 8) x (mt, vmm, mm), mismatches: {len(bad)}")
    assert not bad


def test_c08_matrix_round_growth(detail):
    n, seeds, ks = 256, 5, (2, 4, 8, 16)
    net = gen_cp(n)
    rounds = {"mt": {}, "vmm": {}, "mm": {}}
    for k in ks:
        got = {"mt": [], "vmm": [], "mm": []}
        for seed in range(seeds):
            a, b = random_sparse(n, k, seed), random_sparse(n, k, seed + 1)
            got["mt"].append(mt(net, a, k, seed=seed).rounds)
            got["vmm"].append(vmm(net, random_vector(n, seed), a, k, seed=seed).rounds)
            got["mm"].append(mm(net, a, b, k, seed=seed).rounds)
        for task in got:
            rounds[task][k] = mean(got[task])
    ratios = {}
    for task, per_k in rounds.items():
        scale = (lambda k: k * k) if task == "mm" else (lambda k: k)
        norm = [per_k[k] / scale(k) for k in ks]
        ratios[task] = max(norm) / min(norm)
    detail("max/min ratios " + ", ".join(f"{t} {r:.2f}" for t, r in ratios.items()))
    assert all(r <= 3 for r in ratios.values())


def test_c09_aggregates(detail):
    tasks = ((rank, None), (median, None), (mode, 5), (distinct_count, None))
    rounds = {f.__name__: {} for f, _ in tasks}
    bad = []
    for n in (64, BIG_N):
        net = gen_cp(n)
        for fn, hi in tasks:
            got = []
            for seed in range(20):
                vals = random_values(n, seed, hi=hi) if hi else random_values(n, seed)
                run = fn(net, vals, seed=seed)
                got.append(run.rounds)
                if fn is rank:
                    ok = run.result == sort_ranks(vals)
                else:
                    oracle = {median: median_c, mode: mode_c, distinct_count: distinct_c}[fn]
                    ok = set(run.result.values()) == {oracle(vals)}
                if not ok:
                    bad.append((fn.__name__, n, seed))
            rounds[fn.__name__][n] = mean(got)
    growth = {t: r[BIG_N] - r[64] for t, r in rounds.items()}
    detail(f"mismatches: {len(bad)}, mean rounds 4096 minus 64: "
           + ", ".join(f"{t} {g:+.2f}" for t, g in growth.items()))
    assert not bad and all(g <= 2 for g in growth.values())


def test_c10_topk(detail):
    n = 256
    net = gen_cp(n)
    bad = []
    worst = -math.inf
    for seed in range(20):
        vals, areas, ints = random_area_instance(n, seed)
        rounds = {}
        for r in (1, 4, 16):
            run = topk_by_area(net, vals, areas, ints, r, seed=seed)
            rounds[r] = run.rounds
            if run.result != topk_c(vals, areas, ints, r):
                bad.append((seed, r))
        worst = max(worst, rounds[16] - (4 * rounds[4] + 4))
    detail(f"mismatches: {len(bad)}, max of rounds(16) - (4 rounds(4) + 4): {worst}")
    assert not bad and worst <= 0


def test_c11_ge_fixture(detail):
    net = gen_GE(3)
    fails = check_all(net).failures
    # G_E is built to break the clique emulator axiom, so the run is forced
    res = run_cp_mst(net, force=True)
    s, r = net.labels["s"], net.labels["r"]
    s_edges = {ekey(s, x) for x in net.adj[s]}
    r_count = sum(1 for x in net.adj[r] if ekey(r, x) in res.edges)
    detail(f"axiom failures {sorted(fails)}, s-edges kept {len(s_edges & res.edges)}/{len(s_edges)}, "
           f"r-edges kept {r_count}")
    assert all(net.weights[e] == 2 for e in s_edges)
    assert s_edges <= res.edges and r_count == 1
    assert res.edges == kruskal_mst(net.n, net.weights)


def test_c12_determinism(tmp_path, capsys, detail):
    tasks = ("mst", "transpose", "vmm", "mm", "rank", "median", "mode", "distinct", "topk")
    diff = []
    for task in tasks:
        outs = []
        for i in range(2):
            ans, csv = tmp_path / f"{task}{i}.txt", tmp_path / f"{task}{i}.csv"
            code = main(["run", task, "--network", "cp:100", "--seed", "11", "--k", "3", "--verify",
                         "--answer", str(ans), "--out", str(csv)])
            printed = capsys.readouterr().out
            outs.append((code, ans.read_bytes(), csv.read_bytes(), printed))
        if outs[0] != outs[1] or outs[0][0] != 0:
            diff.append(task)
    detail(f"{len(tasks)} run commands repeated, differing: {diff or 'none'}")
    assert not diff


def test_c13_balls_in_bins(detail):
    k_nodes = 32
    net = clique_network(k_nodes)
    k = k_nodes * k_nodes
    bound = 4 * (k / k_nodes + math.log2(k_nodes))
    worst_bin = worst_relay = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        dests = rng.integers(0, k_nodes, size=k)
        msgs = [(i // k_nodes, int(d), Payload("ball", (i,))) for i, d in enumerate(dests)]
        out, st = send_msgs(Engine(net, seed), msgs, plan="two-hop")
        worst_bin = max(worst_bin, max(len(v) for v in out.values()))
        worst_relay = max(worst_relay, max(st.relay_load.values()))
        assert sorted(pl.words[0] for v in out.values() for _, pl in v) == list(range(k))
    detail(f"max destination load {worst_bin}, max relay load {worst_relay}, bound {bound:.0f}")
    assert worst_bin <= bound and worst_relay <= bound
