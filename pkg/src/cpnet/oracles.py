"""Centralized reference answers.

Everything here works from the problem instance alone and never looks at an
engine.  Speed is not a goal; these are meant to be easy to audit.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .aggregate import ABSENT, ModeAnswer
from .matrix import MODULUS, SparseRow
from .topology import PartitionedNetwork, ekey


class DisconnectedGraph(ValueError):
    pass


@dataclass(frozen=True)
class OracleResult:
    task: str
    answer: object


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        a, b = self.find(a), self.find(b)
        if a == b:
            return False
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        return True


def kruskal_mst(n: int, weights: dict) -> set:
    """Edges of the minimum spanning tree under the (weight, u, v) order.

    weights maps (u, v) with u < v to a positive integer.
    """
    edges = sorted((w, u, v) for (u, v), w in weights.items())
    uf = _UnionFind(n)
    tree = set()
    for w, u, v in edges:
        if uf.union(u, v):
            tree.add(ekey(u, v))
    if len(tree) != n - 1:
        raise DisconnectedGraph(f"graph on {n} nodes is not connected")
    return tree


def network_mst(net: PartitionedNetwork) -> set:
    if net.weights is None:
        raise ValueError("network has no weights")
    return kruskal_mst(net.n, net.weights)


# -- matrices ----------------------------------------------------------------------

def to_dense(rows: dict, n: int) -> list[list[int]]:
    """Row-major n x n list of lists from {node: SparseRow}."""
    A = [[0] * n for _ in range(n)]
    for r in rows.values():
        for c, x in r.entries:
            A[r.row_index - 1][c - 1] = x % MODULUS
    return A


def _dense_row(row, i):
    return SparseRow(i, [(j + 1, x) for j, x in enumerate(row) if x])


def dense_transpose(rows: dict, n: int) -> dict:
    """Answer of mt: node holding row i of A -> row i of A^T."""
    A = to_dense(rows, n)
    out = {}
    for v, r in rows.items():
        i = r.row_index
        out[v] = _dense_row([A[j][i - 1] for j in range(n)], i)
    return out


def dense_vmm(svec: dict, rows: dict, n: int) -> dict:
    """Answer of vmm: node holding s(i) -> (i, s'(i)) with s' = sA."""
    A = to_dense(rows, n)
    s = [0] * n
    for i, x in svec.values():
        s[i - 1] = x % MODULUS
    res = [0] * n
    for i in range(n):
        if s[i]:
            for j in range(n):
                if A[i][j]:
                    res[j] = (res[j] + s[i] * A[i][j]) % MODULUS
    return {v: (i, res[i - 1]) for v, (i, _) in svec.items()}


def dense_mm(a_rows: dict, b_rows: dict, n: int) -> dict:
    """Answer of mm: node holding row i of B -> row i of C = AB."""
    A = to_dense(a_rows, n)
    B = to_dense(b_rows, n)
    out = {}
    for v, r in b_rows.items():
        i = r.row_index - 1
        row = [0] * n
        for j in range(n):
            if A[i][j]:
                a = A[i][j]
                Bj = B[j]
                for c in range(n):
                    if Bj[c]:
                        row[c] = (row[c] + a * Bj[c]) % MODULUS
        out[v] = _dense_row(row, i + 1)
    return out


# -- aggregates --------------------------------------------------------------------

def sort_ranks(values: dict) -> dict:
    """Rank of every node's value; equal values are ordered by node id."""
    order = sorted(values, key=lambda v: (values[v], v))
    return {v: i + 1 for i, v in enumerate(order)}


def median_c(values: dict):
    xs = sorted(values.values())
    return xs[(len(xs) + 1) // 2 - 1]


def mode_c(values: dict) -> ModeAnswer:
    cnt = Counter(values.values())
    top = max(cnt.values())
    if top == 1:
        return ModeAnswer(1, ())
    return ModeAnswer(top, tuple(sorted(x for x, c in cnt.items() if c == top)))


def distinct_c(values: dict) -> int:
    return len(set(values.values()))


def topk_c(values: dict, areas: dict, interests: dict, r: int) -> dict:
    """Per node: the r largest values of its area of interest, padded with ABSENT."""
    per: dict = {}
    for v, x in values.items():
        per.setdefault(areas[v], []).append(x)
    best = {a: sorted(xs, reverse=True)[:r] for a, xs in per.items()}
    out = {}
    for v, a in interests.items():
        xs = best.get(a, [])
        out[v] = tuple(xs) + (ABSENT,) * (r - len(xs))
    return out


def solve(task: str, **inst) -> OracleResult:
    """Dispatch by task name with the same inputs the distributed run gets."""
    if task == "mst":
        ans = network_mst(inst["net"])
    elif task == "transpose":
        ans = dense_transpose(inst["rows"], inst["n"])
    elif task == "vmm":
        ans = dense_vmm(inst["svec"], inst["rows"], inst["n"])
    elif task == "mm":
        ans = dense_mm(inst["a_rows"], inst["b_rows"], inst["n"])
    elif task == "rank":
        ans = sort_ranks(inst["values"])
    elif task == "median":
        ans = median_c(inst["values"])
    elif task == "mode":
        ans = mode_c(inst["values"])
    elif task == "distinct":
        ans = distinct_c(inst["values"])
    elif task == "topk":
        ans = topk_c(inst["values"], inst["areas"], inst["interests"], inst["r"])
    else:
        raise ValueError(f"unknown task {task!r}")
    return OracleResult(task, ans)
