"""Partitioned networks and their generators."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class DisconnectedGraph(ValueError):
    pass


class NetworkFormatError(ValueError):
    pass


def ekey(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass
class PartitionedNetwork:
    """Undirected simple graph with a core/periphery split and optional weights.

    Weights are positive integers keyed by (min, max) endpoint pairs.  Edges
    compare under (weight, min endpoint, max endpoint), which is a total order
    even when two weights coincide.
    """

    n: int
    adj: list[list[int]]
    core: tuple[int, ...]
    weights: dict[tuple[int, int], int] | None = None
    name: str = ""
    labels: dict[str, int] = field(default_factory=dict)

    # -- basic counts --------------------------------------------------------
    @cached_property
    def m(self) -> int:
        return sum(len(a) for a in self.adj) // 2

    @property
    def n_C(self) -> int:
        return len(self.core)

    @property
    def n_P(self) -> int:
        return self.n - len(self.core)

    @cached_property
    def in_core(self) -> list[bool]:
        mask = [False] * self.n
        for c in self.core:
            mask[c] = True
        return mask

    @cached_property
    def periphery(self) -> tuple[int, ...]:
        mask = self.in_core
        return tuple(v for v in range(self.n) if not mask[v])

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adj[u] if u < v]

    def weight(self, u: int, v: int) -> int:
        return self.weights[ekey(u, v)]

    def edge_order(self, u: int, v: int) -> tuple[int, int, int]:
        a, b = ekey(u, v)
        return (self.weights[(a, b)], a, b)

    # -- degree profile ---------------------------------------------------------
    def d_in(self, v: int) -> int:
        mask = self.in_core
        return sum(1 for x in self.adj[v] if mask[x])

    def d_out(self, v: int) -> int:
        return len(self.adj[v]) - self.d_in(v)

    def degree_profile(self) -> dict[int, tuple[int, int]]:
        return {v: (self.d_in(v), self.d_out(v)) for v in range(self.n)}

    @cached_property
    def core_is_clique(self) -> bool:
        k = self.n_C
        return all(self.d_in(c) == k - 1 for c in self.core)

    def core_neighbors(self, v: int) -> list[int]:
        mask = self.in_core
        return [x for x in self.adj[v] if mask[x]]

    # -- validation -----------------------------------------------------------
    def validate(self) -> None:
        if len(self.adj) != self.n:
            raise NetworkFormatError("adjacency size does not match n")
        if len(set(self.core)) != len(self.core):
            raise NetworkFormatError("duplicate core ids")
        for c in self.core:
            if not 0 <= c < self.n:
                raise NetworkFormatError(f"core id {c} out of range")
        for u, nb in enumerate(self.adj):
            if len(set(nb)) != len(nb):
                raise NetworkFormatError(f"parallel edges at {u}")
            for v in nb:
                if v == u:
                    raise NetworkFormatError(f"self loop at {u}")
                if not 0 <= v < self.n or u not in self.adj[v]:
                    raise NetworkFormatError(f"asymmetric edge {u}-{v}")
        if self.weights is not None:
            if set(self.weights) != set(self.edges()):
                raise NetworkFormatError("weights do not cover exactly the edge set")
            if any(w <= 0 for w in self.weights.values()):
                raise NetworkFormatError("weights must be positive")
        if self.n and not is_connected(self):
            raise DisconnectedGraph("network is not connected")

    # -- weights ------------------------------------------------------------------
    def with_random_weights(self, seed: int) -> "PartitionedNetwork":
        """Copy with distinct integer weights drawn from [1, n^4]."""
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
        edges = self.edges()
        hi = max(self.n, 2) ** 4
        chosen: set[int] = set()
        out: list[int] = []
        while len(out) < len(edges):
            for w in rng.integers(1, hi + 1, size=len(edges) - len(out)).tolist():
                if w not in chosen:
                    chosen.add(w)
                    out.append(w)
        return PartitionedNetwork(self.n, self.adj, self.core, dict(zip(edges, out)),
                                  self.name, dict(self.labels))

    # -- file format ----------------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"{self.n} {self.m} {self.n_C}", "core: " + " ".join(map(str, self.core))]
        for u, v in self.edges():
            if self.weights is None:
                lines.append(f"{u} {v}")
            else:
                lines.append(f"{u} {v} {self.weights[(u, v)]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, name: str = "") -> "PartitionedNetwork":
        rows = [ln.strip() for ln in text.splitlines()]
        rows = [ln for ln in rows if ln and not ln.startswith("#")]
        if len(rows) < 2:
            raise NetworkFormatError("missing header or core line")
        try:
            n, m, n_c = (int(x) for x in rows[0].split())
        except ValueError as exc:
            raise NetworkFormatError(f"bad header: {rows[0]!r}") from exc
        if not rows[1].startswith("core:"):
            raise NetworkFormatError("second line must start with 'core:'")
        core = tuple(int(x) for x in rows[1][5:].split())
        if len(core) != n_c:
            raise NetworkFormatError(f"header says {n_c} core nodes, found {len(core)}")
        edges, weights = [], {}
        for ln in rows[2:]:
            parts = ln.split()
            if len(parts) not in (2, 3):
                raise NetworkFormatError(f"bad edge line: {ln!r}")
            u, v = int(parts[0]), int(parts[1])
            edges.append((u, v))
            if len(parts) == 3:
                weights[ekey(u, v)] = int(parts[2])
        if len(edges) != m:
            raise NetworkFormatError(f"header says {m} edges, found {len(edges)}")
        if weights and len(weights) != m:
            raise NetworkFormatError("either all or no edges may carry weights")
        net = from_edges(n, edges, core, weights or None, name)
        net.validate()
        return net


def from_edges(n, edges, core, weights=None, name="", labels=None) -> PartitionedNetwork:
    adj: list[set] = [set() for _ in range(n)]
    for u, v in edges:
        if u == v:
            raise NetworkFormatError(f"self loop at {u}")
        if v in adj[u]:
            raise NetworkFormatError(f"duplicate edge {u}-{v}")
        adj[u].add(v)
        adj[v].add(u)
    if weights is not None:
        weights = {ekey(u, v): w for (u, v), w in weights.items()}
    return PartitionedNetwork(n, [sorted(a) for a in adj], tuple(sorted(core)), weights,
                              name, dict(labels or {}))


def load_network(path) -> PartitionedNetwork:
    with open(path) as fh:
        return PartitionedNetwork.from_text(fh.read(), name=str(path))


def save_network(net: PartitionedNetwork, path) -> None:
    with open(path, "w") as fh:
        fh.write(net.to_text())


# -- generators ---------------------------------------------------------------

def _clique(nodes):
    return [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]]


def gen_cp(n: int, seed: int = 0) -> PartitionedNetwork:
    """Core clique of ceil(sqrt n) nodes; every other node hangs off one core node.

    Core ids are 0..n_C-1, and each core node's periphery leaves get a
    contiguous id range, assigned round-robin so loads differ by at most one.
    The construction is deterministic; `seed` is accepted for interface
    symmetry with the other random inputs.
    """
    if n < 9:
        raise ValueError("gen_cp needs n >= 9")
    k = math.isqrt(n - 1) + 1
    core = list(range(k))
    rest = n - k
    base, extra = divmod(rest, k)
    edges = _clique(core)
    nxt = k
    for c in core:
        cnt = base + (1 if c < extra else 0)
        for p in range(nxt, nxt + cnt):
            edges.append((c, p))
        nxt += cnt
    return from_edges(n, edges, core, name=f"cp:{n}")


def gen_lollipop(n: int) -> PartitionedNetwork:
    if n < 4:
        raise ValueError("gen_lollipop needs n >= 4")
    k = math.isqrt(n)
    core = list(range(k))
    edges = _clique(core)
    prev = 0
    for v in range(k, n):
        edges.append((prev, v))
        prev = v
    return from_edges(n, edges, core, name=f"lollipop:{n}")


def gen_sun(n: int) -> PartitionedNetwork:
    """ceil(n/2)-cycle core; floor(n/2) leaves, one per cycle node in order."""
    if n < 6:
        raise ValueError("gen_sun needs n >= 6")
    c = (n + 1) // 2
    core = list(range(c))
    edges = [(i, (i + 1) % c) for i in range(c)]
    for j in range(n - c):
        edges.append((j, c + j))
    return from_edges(n, edges, core, name=f"sun:{n}")


def gen_dumbbell(n: int) -> PartitionedNetwork:
    """Two adjacent star centres 0 and 1 sharing the n-2 leaves as evenly as possible."""
    if n < 4:
        raise ValueError("gen_dumbbell needs n >= 4")
    edges = [(0, 1)]
    leaves = list(range(2, n))
    half = (len(leaves) + 1) // 2
    edges += [(0, x) for x in leaves[:half]]
    edges += [(1, x) for x in leaves[half:]]
    return from_edges(n, edges, [0, 1], name=f"dumbbell:{n}")


def gen_GB(k: int) -> PartitionedNetwork:
    """k-clique core, k^3 leaves per core node, plus s hanging off core node 0."""
    if k < 2:
        raise ValueError("gen_GB needs k >= 2")
    core = list(range(k))
    edges = _clique(core)
    nxt = k
    for c in core:
        edges += [(c, p) for p in range(nxt, nxt + k ** 3)]
        nxt += k ** 3
    s = nxt
    edges.append((0, s))
    return from_edges(s + 1, edges, core, name=f"gb:{k}", labels={"s": s})


def gen_GE(k: int) -> PartitionedNetwork:
    """k disjoint k-cliques joined through a hub u; periphery is a k^2 x k grid of rows.

    Layout: clique i holds core nodes i*k .. i*k+k-1 and its first node is
    wired to u.  Periphery node (row, col) sits in column `col`; rows are
    paths across the k columns.  Core node a of clique i serves rows
    a*k .. a*k+k-1 of column i.  s touches every row's first node and one
    leftmost-clique core node; r mirrors that on the rightmost side.

    Weights: core-periphery 10, s edges 2, r edges 3, all remaining edges 1.
    """
    if k < 2:
        raise ValueError("gen_GE needs k >= 2")
    u = k * k
    core = list(range(k * k + 1))
    rows = k * k
    pbase = u + 1

    def pid(row, col):
        return pbase + col * rows + row

    s = pbase + k * rows
    r = s + 1
    w: dict = {}
    for i in range(k):
        members = list(range(i * k, i * k + k))
        for e in _clique(members):
            w[e] = 1
        w[(members[0], u)] = 1
        for a, c in enumerate(members):
            for row in range(a * k, a * k + k):
                w[(c, pid(row, i))] = 10
    for row in range(rows):
        for col in range(k - 1):
            w[(pid(row, col), pid(row, col + 1))] = 1
        w[(pid(row, 0), s)] = 2
        w[(pid(row, k - 1), r)] = 3
    w[(k - 1, s)] = 2
    w[((k - 1) * k + k - 1, r)] = 3
    return from_edges(r + 1, list(w), core, w, name=f"ge:{k}",
                      labels={"s": s, "r": r, "u": u})


def gen_GC(k: int) -> PartitionedNetwork:
    """k-clique core, k/2 leaves per core node, and a k^2/2 periphery cycle off core node 0."""
    if k < 2 or k % 2:
        raise ValueError("gen_GC needs an even k >= 2")
    core = list(range(k))
    edges = _clique(core)
    nxt = k
    for c in core:
        edges += [(c, p) for p in range(nxt, nxt + k // 2)]
        nxt += k // 2
    cyc = list(range(nxt, nxt + k * k // 2))
    if len(cyc) >= 3:
        edges += [(cyc[i], cyc[(i + 1) % len(cyc)]) for i in range(len(cyc))]
    else:
        edges += [(cyc[i], cyc[i + 1]) for i in range(len(cyc) - 1)]
    edges.append((0, cyc[0]))
    return from_edges(nxt + len(cyc), edges, core, name=f"gc:{k}")


def clique_network(k: int) -> PartitionedNetwork:
    """All-core clique; handy for routing tests."""
    return from_edges(k, _clique(list(range(k))), list(range(k)), name=f"clique:{k}")


def path_network(n: int) -> PartitionedNetwork:
    return from_edges(n, [(i, i + 1) for i in range(n - 1)], [0], name=f"path:{n}")


GENERATORS = {
    "cp": gen_cp, "lollipop": gen_lollipop, "sun": gen_sun, "dumbbell": gen_dumbbell,
    "gb": gen_GB, "ge": gen_GE, "gc": gen_GC, "clique": clique_network, "path": path_network,
}


def from_spec(spec: str, seed: int = 0) -> PartitionedNetwork:
    """Build a network from 'family:size', e.g. 'cp:1024' or 'ge:3'."""
    fam, _, size = spec.partition(":")
    fam = fam.strip().lower()
    if fam not in GENERATORS or not size.strip().isdigit():
        raise ValueError(f"bad network spec {spec!r}")
    size = int(size)
    if fam == "cp":
        return gen_cp(size, seed)
    return GENERATORS[fam](size)


# -- distances -------------------------------------------------------------------

def bfs(net: PartitionedNetwork, src: int) -> list[int]:
    dist = [-1] * net.n
    dist[src] = 0
    q = deque([src])
    adj = net.adj
    while q:
        x = q.popleft()
        d = dist[x] + 1
        for y in adj[x]:
            if dist[y] < 0:
                dist[y] = d
                q.append(y)
    return dist


def is_connected(net: PartitionedNetwork) -> bool:
    return min(bfs(net, 0)) >= 0


def diameter(net: PartitionedNetwork, exhaustive: bool = False) -> int:
    """Exact diameter.

    By default eccentricities are bounded with each BFS and vertices whose
    bounds settle are skipped; `exhaustive=True` runs a BFS from every node.
    Both return the same value.
    """
    n = net.n
    if n == 0:
        return 0
    if exhaustive:
        best = 0
        for v in range(n):
            d = bfs(net, v)
            if min(d) < 0:
                raise DisconnectedGraph("network is not connected")
            best = max(best, max(d))
        return best
    adj = net.adj
    lo = [0] * n
    hi = [n] * n
    alive = set(range(n))
    # settled nodes still make good sources: a central node prunes its neighbours
    fresh = set(range(n))
    dlo, dhi = 0, n
    pick_high = True
    while alive and dlo < dhi:
        if pick_high:
            v = max(alive, key=lambda x: (hi[x], len(adj[x]), -x))
        else:
            v = min(fresh, key=lambda x: (lo[x], -len(adj[x]), x))
        pick_high = not pick_high
        d = bfs(net, v)
        if min(d) < 0:
            raise DisconnectedGraph("network is not connected")
        ecc = max(d)
        dlo = max(dlo, ecc)
        alive.discard(v)
        fresh.discard(v)
        for w in fresh:
            dw = d[w]
            lo[w] = max(lo[w], ecc - dw, dw)
            hi[w] = min(hi[w], ecc + dw)
        done = []
        for w in alive:
            if hi[w] <= dlo or lo[w] == hi[w]:
                done.append(w)
                dlo = max(dlo, lo[w])
        alive.difference_update(done)
        dhi = max((hi[w] for w in alive), default=dlo)
    return dlo
