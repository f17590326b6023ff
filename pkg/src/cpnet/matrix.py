"""Sparse matrix transposition, vector-matrix and matrix-matrix products.

Every node starts with one row (and for the vector product one vector
entry).  Rows travel to the representatives, the core shuffles entries to
block owners (core node j owns indices (j-1)*b+1 .. j*b with b = ceil(n/n_C)),
and results come back along the same routes.  Arithmetic is mod 2^61 - 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .axioms import check_all, schedule_for_run
from .engine import Engine, Payload, RoundLimitExceeded
from .services import down_stream, down_wave, packed_send, prepare, send_msgs, up_stream, up_wave
from .topology import PartitionedNetwork

MODULUS = (1 << 61) - 1
# per-call round bounds: ROUND_FACTOR*(k+1) for mt and vmm, ROUND_FACTOR*(k+1)^2 for mm
ROUND_FACTOR = 10


class SparsityViolation(ValueError):
    pass


class MatrixFormatError(ValueError):
    pass


@dataclass
class SparseRow:
    row_index: int
    entries: list  # (col_index, value), strictly increasing columns, nonzero values

    def __post_init__(self):
        cols = [c for c, _ in self.entries]
        if any(b <= a for a, b in zip(cols, cols[1:])):
            raise MatrixFormatError(f"row {self.row_index}: columns must increase")
        if any(v % MODULUS == 0 for _, v in self.entries):
            raise MatrixFormatError(f"row {self.row_index}: zero entries are not stored")


@dataclass
class MatrixRun:
    result: dict          # node -> SparseRow, or node -> (index, value) for vmm
    rounds: int           # rounds of the algorithm itself
    setup_rounds: int     # representatives and renaming
    engine: Engine

    @property
    def total_rounds(self) -> int:
        return self.rounds + self.setup_rounds


# -- helpers -----------------------------------------------------------------------

def check_sparsity(rows: dict, k: int, n: int) -> None:
    colcount: dict = {}
    for r in rows.values():
        if len(r.entries) > k:
            raise SparsityViolation(f"row {r.row_index} has {len(r.entries)} > {k} nonzeros")
        for c, _ in r.entries:
            if not 1 <= c <= n:
                raise MatrixFormatError(f"column {c} outside 1..{n}")
            colcount[c] = colcount.get(c, 0) + 1
    for c, cnt in colcount.items():
        if cnt > k:
            raise SparsityViolation(f"column {c} has {cnt} > {k} nonzeros")


def _check_rows(net, rows):
    idx = sorted(r.row_index for r in rows.values())
    if idx != list(range(1, net.n + 1)):
        raise MatrixFormatError("rows must be indexed 1..n, one per node")


class _Ctx:
    def __init__(self, net, seed, force, gamma, alpha=2, beta=2, round_limit=None):
        report = check_all(net, alpha=alpha, beta=beta, gamma=gamma)
        if report.failures and not force:
            from .mst import AxiomCheckFailed
            raise AxiomCheckFailed(report.summary())
        self.net = net
        self.force = force
        self.eng = Engine(net, seed, round_limit=round_limit)
        self.setup, _ = prepare(self.eng, schedule_for_run(net, report, force))
        self.start = self.eng.round
        k = net.n_C
        self.block = math.ceil(net.n / k)
        self.order = self.setup.core_order

    def owner(self, i: int) -> int:
        """Core node responsible for index i (1-based)."""
        return self.order[(i - 1) // self.block]

    @property
    def rep(self):
        return self.setup.reps.rep

    def done(self, result, bound: int) -> MatrixRun:
        rounds = self.eng.round - self.start
        if rounds > bound and not self.force:
            raise RoundLimitExceeded(bound, f"{rounds} rounds exceed the bound {bound}")
        return MatrixRun(result, rounds, self.start, self.eng)

    def fetch_rows(self, wanted: dict, store: dict):
        """Node v asks for row wanted[v]; rows come from their owners' `store`.

        store: core node -> {index: [(col, value), ...]}.  Returns node -> SparseRow.
        """
        eng = self.eng
        net = self.net
        got = up_wave(eng, self.setup.reps, {v: Payload("req", (i,)) for v, i in wanted.items()
                                             if not net.in_core[v]})
        asks = [(w, v, pl.words[0]) for w, lst in got.items() for v, pl in lst]
        asks += [(v, v, i) for v, i in wanted.items() if net.in_core[v]]
        msgs = [(w, self.owner(i), Payload("get", (i,))) for w, v, i in asks]
        got, _ = send_msgs(eng, msgs)
        replies = []
        for o, lst in got.items():
            for w, pl in lst:
                i = pl.words[0]
                for c, x in store.get(o, {}).get(i, ()):
                    replies.append((o, w, Payload("row", (i, c, x))))
        got, _ = send_msgs(eng, replies)
        at_rep: dict = {}
        for w, lst in got.items():
            for _, pl in lst:
                i, c, x = pl.words
                at_rep.setdefault((w, i), []).append((c, x))
        down = {}
        out = {}
        for v, i in wanted.items():
            ents = sorted(at_rep.get((self.rep[v], i), ()))
            if net.in_core[v]:
                out[v] = SparseRow(i, ents)
            else:
                down[v] = [Payload("row", (i, c, x)) for c, x in ents]
        recv = down_stream(eng, self.setup.reps, down)
        for v, i in wanted.items():
            if not net.in_core[v]:
                ents = sorted((pl.words[1], pl.words[2]) for _, pl in recv.get(v, ()))
                out[v] = SparseRow(i, ents)
        return out

    def ship_rows(self, rows: dict, tag: str):
        """Send every node's row entries to its representative; returns rep -> [(i, c, x)]."""
        items = {v: [Payload(tag, (r.row_index, c, x)) for c, x in r.entries]
                 for v, r in rows.items() if not self.net.in_core[v]}
        got = up_stream(self.eng, self.setup.reps, items)
        at: dict = {}
        for w, lst in got.items():
            for _, pl in lst:
                at.setdefault(w, []).append(pl.words)
        for v, r in rows.items():
            if self.net.in_core[v]:
                at.setdefault(v, []).extend((r.row_index, c, x) for c, x in r.entries)
        return at


# -- algorithms --------------------------------------------------------------------

def mt(net: PartitionedNetwork, rows: dict, k: int, seed: int = 0, force: bool = False,
       gamma: int = 2, alpha: int = 2, beta: int = 2,
       round_limit: int | None = None) -> MatrixRun:
    """Transpose: the node holding row i of A ends with row i of A^T."""
    _check_rows(net, rows)
    check_sparsity(rows, k, net.n)
    ctx = _Ctx(net, seed, force, gamma, alpha, beta, round_limit)
    eng = ctx.eng
    with eng.tag("mt:1"):
        at = ctx.ship_rows(rows, "a")
    with eng.tag("mt:2"):
        msgs = [(w, ctx.owner(c), Payload("a", (i, c, x)))
                for w in sorted(at) for i, c, x in at[w]]
        got, _ = send_msgs(eng, msgs)
    store: dict = {}
    for o, lst in got.items():
        for _, pl in lst:
            i, c, x = pl.words
            store.setdefault(o, {}).setdefault(c, []).append((i, x))
    with eng.tag("mt:3"):
        out = ctx.fetch_rows({v: r.row_index for v, r in rows.items()}, store)
    return ctx.done(out, ROUND_FACTOR * (k + 1))


def vmm(net: PartitionedNetwork, svec: dict, rows: dict, k: int, seed: int = 0,
        force: bool = False, gamma: int = 2, alpha: int = 2, beta: int = 2,
        round_limit: int | None = None) -> MatrixRun:
    """s' = sA: the node holding s(i) ends with s'(i).

    svec maps node -> (i, s_i); rows maps node -> SparseRow of A.  Steps that
    do not depend on each other share a wave or a batch: a node's s entry, its
    row index and its later request for s' travel up together, requests for
    s(r) go out with the redistribution of s, and requests for s'(i) go out
    with the products.
    """
    _check_rows(net, rows)
    check_sparsity(rows, k, net.n)
    if sorted(i for i, _ in svec.values()) != list(range(1, net.n + 1)):
        raise MatrixFormatError("vector entries must be indexed 1..n, one per node")
    ctx = _Ctx(net, seed, force, gamma, alpha, beta, round_limit)
    eng, reps, in_core = ctx.eng, ctx.setup.reps, net.in_core

    # steps 1 and 3: s entry and row index to the representative
    words = {v: (svec[v][0], svec[v][1] % MODULUS, rows[v].row_index) for v in svec}
    with eng.tag("vmm:1"):
        got = up_wave(eng, reps, {v: Payload("s", w) for v, w in words.items() if not in_core[v]})
    at_rep = [(w, v, pl.words) for w, lst in got.items() for v, pl in lst]
    at_rep += [(v, v, w) for v, w in words.items() if in_core[v]]

    # steps 2 and 4: redistribute s, ask owners for s(r)
    with eng.tag("vmm:2"):
        ents: dict = {}
        gets: dict = {}
        for w, _, (i, x, r) in at_rep:
            ents.setdefault((w, ctx.owner(i)), []).append((i, x))
            gets.setdefault((w, ctx.owner(r)), []).append((r,))
        got_s, got_get = packed_send(eng, ("s", 2, ents), ("get", 1, gets))
    s_store = {(o, i): x for o, lst in got_s.items() for _, (i, x) in lst}
    with eng.tag("vmm:4"):
        back: dict = {}
        for o, lst in got_get.items():
            for w, (r,) in lst:
                back.setdefault((o, w), []).append((r, s_store[(o, r)]))
        got, = packed_send(eng, ("s", 2, back))
    s_at_rep = {(w, r): x for w, lst in got.items() for _, (r, x) in lst}

    # step 5: s(r) down to the row holders
    with eng.tag("vmm:5"):
        down = {v: Payload("s", (r.row_index, s_at_rep[(ctx.rep[v], r.row_index)]))
                for v, r in rows.items() if not in_core[v]}
        down_wave(eng, reps, down)

    # step 6: products up to the representatives
    with eng.tag("vmm:6"):
        prods = {}
        for v, r in rows.items():
            si = s_at_rep[(ctx.rep[v], r.row_index)] if in_core[v] else down[v].words[1]
            prods[v] = [(j, (x * si) % MODULUS) for j, x in r.entries]
        items = {v: [Payload("p", p) for p in ps] for v, ps in prods.items() if not in_core[v]}
        got = up_stream(eng, reps, items)
    p_at: dict = {}
    for w, lst in got.items():
        for _, pl in lst:
            p_at.setdefault(w, []).append(pl.words)
    for v, ps in prods.items():
        if in_core[v]:
            p_at.setdefault(v, []).extend(ps)

    # steps 7 and 8: products to the owners of s'(j), requests for s'(i)
    with eng.tag("vmm:7"):
        prods: dict = {}
        gets = {}
        for w in sorted(p_at):
            for j, x in p_at[w]:
                prods.setdefault((w, ctx.owner(j)), []).append((j, x))
        for w, _, (i, _, _) in at_rep:
            gets.setdefault((w, ctx.owner(i)), []).append((i,))
        # products travel one per message; only the requests are packed
        got_p, got_get = packed_send(eng, ("p", 2, prods, 1), ("get", 1, gets))
    acc: dict = {}
    for o, lst in got_p.items():
        for _, (j, x) in lst:
            acc[(o, j)] = (acc.get((o, j), 0) + x) % MODULUS
    with eng.tag("vmm:8"):
        back = {}
        for o, lst in got_get.items():
            for w, (i,) in lst:
                back.setdefault((o, w), []).append((i, acc.get((o, i), 0)))
        got, = packed_send(eng, ("s'", 2, back))
        res_at = {(w, i): x for w, lst in got.items() for _, (i, x) in lst}
        out = {}
        down = {}
        for v, (i, _) in svec.items():
            val = res_at[(ctx.rep[v], i)]
            out[v] = (i, val)
            if not in_core[v]:
                down[v] = Payload("s'", (i, val))
        down_wave(eng, reps, down)
    return ctx.done(out, ROUND_FACTOR * (k + 1))


def mm(net: PartitionedNetwork, a_rows: dict, b_rows: dict, k: int, seed: int = 0,
       force: bool = False, gamma: int = 2, alpha: int = 2, beta: int = 2,
       round_limit: int | None = None) -> MatrixRun:
    """C = AB: the node holding row i of B ends with row i of C."""
    _check_rows(net, a_rows)
    _check_rows(net, b_rows)
    check_sparsity(a_rows, k, net.n)
    check_sparsity(b_rows, k, net.n)
    ctx = _Ctx(net, seed, force, gamma, alpha, beta, round_limit)
    eng = ctx.eng
    with eng.tag("mm:1"):
        b_at = ctx.ship_rows(b_rows, "b")
    with eng.tag("mm:2"):
        got, _ = send_msgs(eng, [(w, ctx.owner(i), Payload("b", (i, c, x)))
                                 for w in sorted(b_at) for i, c, x in b_at[w]])
    b_store: dict = {}
    for o, lst in got.items():
        for _, pl in lst:
            i, c, x = pl.words
            b_store.setdefault(o, {}).setdefault(i, []).append((c, x))
    with eng.tag("mm:3"):
        a_at = ctx.ship_rows(a_rows, "a")
    with eng.tag("mm:4"):
        got, _ = send_msgs(eng, [(w, ctx.owner(j), Payload("a", (i, j, x)))
                                 for w in sorted(a_at) for i, j, x in a_at[w]])
    with eng.tag("mm:5"):
        msgs = []
        for o in sorted(got):
            for _, pl in got[o]:
                i, j, x = pl.words
                for c, y in sorted(b_store.get(o, {}).get(j, ())):
                    msgs.append((o, ctx.owner(i), Payload("c", (i, c, (x * y) % MODULUS))))
        got, _ = send_msgs(eng, msgs)
    c_store: dict = {}
    for o, lst in got.items():
        for _, pl in lst:
            i, c, x = pl.words
            row = c_store.setdefault(o, {}).setdefault(i, {})
            row[c] = (row.get(c, 0) + x) % MODULUS
    store = {o: {i: sorted((c, x) for c, x in row.items() if x) for i, row in rows.items()}
             for o, rows in c_store.items()}
    with eng.tag("mm:6"):
        out = ctx.fetch_rows({v: r.row_index for v, r in b_rows.items()}, store)
    return ctx.done(out, ROUND_FACTOR * (k + 1) ** 2)


# -- inputs ------------------------------------------------------------------------

def random_sparse(n: int, k: int, seed: int = 0) -> dict[int, SparseRow]:
    """Union of k random permutation matrices with random nonzero values; row i+1 at node i."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA11]))
    cells: dict = {}
    for _ in range(k):
        perm = rng.permutation(n)
        vals = rng.integers(1, MODULUS, size=n)
        for i in range(n):
            cells[(i + 1, int(perm[i]) + 1)] = int(vals[i])
    rows = {v: [] for v in range(n)}
    for (i, j), x in cells.items():
        rows[i - 1].append((j, x))
    return {v: SparseRow(v + 1, sorted(e)) for v, e in rows.items()}


def random_vector(n: int, seed: int = 0) -> dict[int, tuple]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EC]))
    vals = rng.integers(0, MODULUS, size=n)
    return {v: (v + 1, int(vals[v])) for v in range(n)}


def rows_to_text(n: int, k: int, rows: dict) -> str:
    lines = [f"{n} {k}"]
    for r in sorted(rows.values(), key=lambda r: r.row_index):
        lines += [f"{r.row_index} {c} {x}" for c, x in r.entries]
    return "\n".join(lines) + "\n"


def rows_from_text(text: str) -> tuple[int, int, dict]:
    """Parse `n k` then `i j v` lines; row i is held by node i-1."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or len(lines[0]) != 2:
        raise MatrixFormatError("header must be 'n k'")
    n, k = int(lines[0][0]), int(lines[0][1])
    rows = {v: [] for v in range(n)}
    for parts in lines[1:]:
        if len(parts) != 3:
            raise MatrixFormatError(f"bad entry line {' '.join(parts)!r}")
        i, j, x = int(parts[0]), int(parts[1]), int(parts[2])
        if not (1 <= i <= n and 1 <= j <= n):
            raise MatrixFormatError(f"entry ({i},{j}) outside 1..{n}")
        if x % MODULUS:
            rows[i - 1].append((j, x % MODULUS))
    return n, k, {v: SparseRow(v + 1, sorted(e)) for v, e in rows.items()}


def vector_to_text(n: int, vec: dict) -> str:
    return f"{n}\n" + "".join(f"{i} {x}\n" for i, x in sorted(vec.values()))


def vector_from_text(text: str) -> tuple[int, dict]:
    """Parse `n` then `i v` lines; entry i is held by node i-1."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    n = int(lines[0][0])
    vec = {v: (v + 1, 0) for v in range(n)}
    for parts in lines[1:]:
        i, x = int(parts[0]), int(parts[1])
        if not 1 <= i <= n:
            raise MatrixFormatError(f"vector index {i} outside 1..{n}")
        vec[i - 1] = (i, x % MODULUS)
    return n, vec
