import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpnet.matrix import (MODULUS, ROUND_FACTOR, MatrixFormatError, SparseRow, SparsityViolation, mm, mt,
                          random_sparse, random_vector, rows_from_text, rows_to_text, vector_from_text,
                          vector_to_text, vmm)
from cpnet.mst import AxiomCheckFailed
from cpnet.oracles import dense_mm, dense_transpose, dense_vmm
from cpnet.topology import gen_cp, gen_lollipop

NET = gen_cp(256)


def identity(n):
    return {v: SparseRow(v + 1, [(v + 1, 1)]) for v in range(n)}


def empty(n):
    return {v: SparseRow(v + 1, []) for v in range(n)}


def test_transpose_identity():
    net = gen_cp(64)
    assert mt(net, identity(64), 1).result == identity(64)


def test_transpose_single_entry():
    net = gen_cp(36)
    rows = empty(36)
    rows[1] = SparseRow(2, [(5, 7)])
    res = mt(net, rows, 1).result
    assert res[4] == SparseRow(5, [(2, 7)])
    assert all(not r.entries for v, r in res.items() if v != 4)


def test_transpose_random_k8():
    a = random_sparse(256, 8, seed=3)
    run = mt(NET, a, 8, seed=3)
    assert run.result == dense_transpose(a, 256)
    assert run.rounds <= ROUND_FACTOR * 9


def test_vmm_identity():
    s = random_vector(64, 2)
    assert vmm(gen_cp(64), s, identity(64), 1).result == s


def test_vmm_diagonal():
    n = 49
    rng = np.random.default_rng(5)
    x = rng.integers(0, 1 << 20, size=n)
    y = rng.integers(0, 1 << 20, size=n)
    s = {v: (v + 1, int(x[v]) + 1) for v in range(n)}
    a = {v: SparseRow(v + 1, [(v + 1, int(y[v]) + 1)]) for v in range(n)}
    res = vmm(gen_cp(n), s, a, 1).result
    assert res == {v: (v + 1, (int(x[v]) + 1) * (int(y[v]) + 1) % MODULUS) for v in range(n)}


def test_vmm_random_k4():
    s, a = random_vector(256, 1), random_sparse(256, 4, 1)
    assert vmm(NET, s, a, 4, seed=1).result == dense_vmm(s, a, 256)


def test_mm_identity():
    a = random_sparse(64, 3, 4)
    assert mm(gen_cp(64), a, identity(64), 3).result == a


def test_mm_fan_in():
    n, k = 64, 4
    a = empty(n)
    a[0] = SparseRow(1, [(i, 1) for i in range(2, k + 2)])
    b = empty(n)
    vals = {}
    for i in range(2, k + 2):
        cols = [(i - 2) * k + j + 1 for j in range(k)]
        b[i - 1] = SparseRow(i, [(c, 100 * i + c) for c in cols])
        vals.update({c: 100 * i + c for c in cols})
    c = mm(gen_cp(n), a, b, k).result
    assert c[0] == SparseRow(1, sorted(vals.items()))
    assert len(c[0].entries) == k * k


def test_mm_random_k4():
    a, b = random_sparse(256, 4, 7), random_sparse(256, 4, 8)
    assert mm(NET, a, b, 4, seed=7).result == dense_mm(a, b, 256)


def test_sparsity_enforced():
    a = random_sparse(64, 3, 0)
    with pytest.raises(SparsityViolation):
        mt(gen_cp(64), a, 2)


def test_row_format():
    with pytest.raises(MatrixFormatError):
        SparseRow(1, [(3, 1), (2, 1)])
    with pytest.raises(MatrixFormatError):
        SparseRow(1, [(3, MODULUS)])
    with pytest.raises(MatrixFormatError):
        rows_from_text("4\n")
    with pytest.raises(MatrixFormatError):
        rows_from_text("4 1\n5 1 1\n")


def test_precheck_gate():
    with pytest.raises(AxiomCheckFailed):
        mt(gen_lollipop(64), identity(64), 1)


def test_text_roundtrip():
    a = random_sparse(50, 3, 9)
    assert rows_from_text(rows_to_text(50, 3, a)) == (50, 3, a)
    s = random_vector(50, 9)
    assert vector_from_text(vector_to_text(50, s)) == (50, s)


@settings(max_examples=15, deadline=None)
@given(st.integers(9, 120), st.integers(1, 4), st.integers(0, 10_000))
def test_matches_oracles(n, k, seed):
    net = gen_cp(n, seed)
    a, b = random_sparse(n, k, seed), random_sparse(n, k, seed + 1)
    s = random_vector(n, seed)
    assert mt(net, a, k, seed=seed).result == dense_transpose(a, n)
    assert vmm(net, s, a, k, seed=seed).result == dense_vmm(s, a, n)
    assert mm(net, a, b, k, seed=seed).result == dense_mm(a, b, n)
