import pytest
from hypothesis import given, settings, strategies as st

from cpnet.aggregate import (ABSENT, ModeAnswer, ModeSetTooLarge, ValueFormatError, check_areas,
                             distinct_count, median, mode, random_area_instance, random_values, rank,
                             topk_by_area, values_from_text, values_to_text)
from cpnet.engine import Engine
from cpnet.oracles import distinct_c, median_c, mode_c, sort_ranks, topk_c
from cpnet.services import prepare
from cpnet.topology import gen_cp

NET256 = gen_cp(256)


def test_rank_of_new_ids():
    net = gen_cp(100, 2)
    setup, _ = prepare(Engine(net))
    vals = {v: setup.new_id[v] for v in range(net.n)}
    assert rank(net, vals).result == vals


def test_rank_all_equal_follows_node_ids():
    net = gen_cp(64)
    assert rank(net, {v: 7 for v in range(64)}).result == {v: v + 1 for v in range(64)}


def test_rank_random():
    vals = random_values(256, 3)
    assert rank(NET256, vals, seed=3).result == sort_ranks(vals)


def test_median_cases():
    assert set(median(NET256, {v: v + 1 for v in range(256)}).result.values()) == {128}
    assert set(median(NET256, {v: 9 for v in range(256)}).result.values()) == {9}
    net = gen_cp(1024, 1)
    vals = random_values(1024, 1, hi=1 << 40)
    run = median(net, vals, seed=1)
    assert set(run.result.values()) == {median_c(vals)}
    small = median(gen_cp(64, 1), random_values(64, 1, hi=1 << 40), seed=1)
    assert run.rounds <= small.rounds + 2


def test_mode_all_distinct():
    res = mode(NET256, {v: 3 * v for v in range(256)}).result
    assert set(res.values()) == {ModeAnswer(1, ())}


def test_mode_half():
    vals = {v: 5 if v % 2 else 1000 + v for v in range(256)}
    assert set(mode(NET256, vals).result.values()) == {ModeAnswer(128, (5,))}


def test_mode_run_across_three_blocks():
    # 16 core nodes, blocks of 16: a value occurring 40 times covers at least 3 blocks
    vals = {v: (500 if v < 40 else v * 7) for v in range(256)}
    vals.update({v: 100 for v in range(40, 50)})
    res = mode(NET256, vals).result
    assert set(res.values()) == {mode_c(vals)} == {ModeAnswer(40, (500,))}


def test_mode_budget():
    vals = {v: v // 2 for v in range(256)}
    with pytest.raises(ModeSetTooLarge):
        mode(NET256, vals)


def test_distinct_cases():
    assert set(distinct_count(NET256, {v: 4 for v in range(256)}).result.values()) == {1}
    assert set(distinct_count(NET256, {v: v for v in range(256)}).result.values()) == {256}
    net = gen_cp(512, 2)
    vals = random_values(512, 2, hi=20)
    assert set(distinct_count(net, vals).result.values()) == {distinct_c(vals)}


def test_value_checks():
    with pytest.raises(ValueFormatError):
        rank(NET256, {0: 1})
    with pytest.raises(ValueFormatError):
        rank(NET256, {v: -1 for v in range(256)})
    with pytest.raises(ValueFormatError):
        values_from_text("0 1\n1 2 3\n")
    with pytest.raises(ValueFormatError):
        values_from_text("0 1\n0 2\n")


def test_topk_r1_is_area_max():
    vals, areas, ints = random_area_instance(256, 4)
    res = topk_by_area(NET256, vals, areas, ints, 1, seed=4).result
    best = {}
    for v, x in vals.items():
        best[areas[v]] = max(best.get(areas[v], 0), x)
    assert res == {v: (best.get(ints[v], ABSENT),) for v in vals}


def test_topk_exact_area_size():
    n = 64
    areas = {v: 1 + v % 8 for v in range(n)}
    vals = {v: (areas[v] - 1) * n + 1 + v for v in range(n)}
    ints = {v: 3 for v in range(n)}
    res = topk_by_area(gen_cp(n), vals, areas, ints, 8).result
    whole = tuple(sorted((x for v, x in vals.items() if areas[v] == 3), reverse=True))
    assert len(whole) == 8
    assert set(res.values()) == {whole}


def test_topk_random_with_split_area():
    vals, areas, ints = random_area_instance(256, 6)
    ranks = sort_ranks(vals)
    block = 256 // NET256.n_C
    spans = {}
    for v, a in areas.items():
        spans.setdefault(a, set()).add((ranks[v] - 1) // block)
    assert any(len(s) >= 2 for s in spans.values())
    assert topk_by_area(NET256, vals, areas, ints, 4, seed=6).result == topk_c(vals, areas, ints, 4)


def test_topk_padding():
    n = 36
    vals = {v: v + 1 for v in range(n)}
    areas = {v: 1 for v in range(n)}
    ints = {v: 2 for v in range(n)}
    res = topk_by_area(gen_cp(n), vals, areas, ints, 3).result
    assert set(res.values()) == {(ABSENT, ABSENT, ABSENT)}


def test_area_checks():
    n = 36
    vals = {v: v + 1 for v in range(n)}
    ones = {v: 1 for v in range(n)}
    with pytest.raises(ValueFormatError):
        check_areas(gen_cp(n), vals, {v: 99 for v in range(n)}, ones)
    with pytest.raises(ValueFormatError):
        check_areas(gen_cp(n), {v: 0 for v in range(n)}, ones, ones)
    overlap = {v: 1 + v % 2 for v in range(n)}
    with pytest.raises(ValueFormatError):
        check_areas(gen_cp(n), vals, overlap, ones)


def test_text_roundtrip():
    vals, areas, ints = random_area_instance(40, 1)
    assert values_from_text(values_to_text(vals, areas, ints)) == (vals, areas, ints)
    plain = random_values(40, 1)
    assert values_from_text(values_to_text(plain)) == (plain, None, None)


@settings(max_examples=15, deadline=None)
@given(st.integers(9, 300), st.integers(0, 10_000), st.integers(1, 600))
def test_aggregates_match_oracles(n, seed, hi):
    net = gen_cp(n, seed)
    vals = random_values(n, seed, hi=hi)
    assert rank(net, vals, seed=seed).result == sort_ranks(vals)
    for fn, oracle in ((median, median_c), (distinct_count, distinct_c)):
        res = fn(net, vals, seed=seed).result
        assert set(res.values()) == {oracle(vals)}
    expect = mode_c(vals)
    if expect.frequency == 1 or len(expect.values) <= 4:
        assert set(mode(net, vals, seed=seed).result.values()) == {expect}
    else:
        with pytest.raises(ModeSetTooLarge):
            mode(net, vals, seed=seed)


@settings(max_examples=10, deadline=None)
@given(st.integers(9, 300), st.integers(0, 10_000), st.integers(1, 8))
def test_topk_matches_oracle(n, seed, r):
    net = gen_cp(n, seed)
    vals, areas, ints = random_area_instance(n, seed)
    assert topk_by_area(net, vals, areas, ints, r, seed=seed).result == topk_c(vals, areas, ints, r)
