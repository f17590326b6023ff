"""Decision procedures, with certificates, for the three core-periphery axioms.

A_B  balanced boundary      d_out(v)/(d_in(v)+1) <= alpha for every core node
A_E  clique emulation       all ordered core pairs exchange a message in beta rounds
A_C  convergecast           every periphery node reaches the core in gamma rounds
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import networkx as nx

from .topology import PartitionedNetwork

DEFAULT_ALPHA = 2
DEFAULT_BETA = 2
DEFAULT_GAMMA = 2
MAX_GAMMA = 16


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    UNKNOWN = "unknown"


@dataclass
class BalancedResult:
    passed: bool
    worst_ratio: Fraction
    witness: int | None
    ratios: dict[int, Fraction] = field(default_factory=dict)


@dataclass
class ConvergecastResult:
    passed: bool
    gamma: int
    # periphery node -> list of hops (round, from, to); the last hop lands in the core
    schedule: dict[int, list[tuple[int, int, int]]] | None = None

    def rounds(self) -> int:
        if not self.schedule:
            return 0
        return max((h[-1][0] for h in self.schedule.values() if h), default=0)


@dataclass
class EmulationResult:
    verdict: Verdict
    achieved_beta: int | None = None
    certificate: str = ""
    # list of rounds, each a list of (src, dst, origin, target) hops
    schedule: list | None = None

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS


@dataclass
class AxiomReport:
    balanced: BalancedResult
    emulation: EmulationResult
    convergecast: ConvergecastResult
    params: tuple[int, int, int]

    @property
    def failures(self) -> set[str]:
        out = set()
        if not self.balanced.passed:
            out.add("A_B")
        if not self.emulation.passed:
            out.add("A_E")
        if not self.convergecast.passed:
            out.add("A_C")
        return out

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        a, b, g = self.params
        lines = [f"parameters: alpha={a} beta={b} gamma={g} (chosen defaults stand in for Theta(1))"]
        br = self.balanced
        lines.append(f"A_B {'pass' if br.passed else 'FAIL'}: worst ratio {br.worst_ratio} at node {br.witness}")
        er = self.emulation
        extra = f", achieved beta {er.achieved_beta}" if er.achieved_beta is not None else ""
        lines.append(f"A_E {er.verdict.value.upper() if not er.passed else 'pass'}{extra}: {er.certificate}")
        cr = self.convergecast
        if cr.passed:
            lines.append(f"A_C pass: schedule finishes in {cr.rounds()} round(s)")
        else:
            lines.append(f"A_C FAIL: no {cr.gamma}-round convergecast schedule exists")
        fails = sorted(self.failures)
        lines.append("fails: " + ", ".join(fails) if fails else "all axioms hold")
        return "\n".join(lines)

    def csv_row(self) -> dict:
        return {
            "alpha": self.params[0], "beta": self.params[1], "gamma": self.params[2],
            "A_B": int(self.balanced.passed), "worst_ratio": str(self.balanced.worst_ratio),
            "A_E": self.emulation.verdict.value, "achieved_beta": self.emulation.achieved_beta or "",
            "A_C": int(self.convergecast.passed), "fails": " ".join(sorted(self.failures)),
        }


# -- A_B ----------------------------------------------------------------------

def check_balanced(net: PartitionedNetwork, alpha=DEFAULT_ALPHA) -> BalancedResult:
    ratios = {}
    worst, witness = Fraction(0), None
    for v in net.core:
        di = net.d_in(v)
        r = Fraction(len(net.adj[v]) - di, di + 1)
        ratios[v] = r
        if witness is None or r > worst:
            worst, witness = r, v
    return BalancedResult(worst <= alpha, worst, witness, ratios)


# -- A_C ----------------------------------------------------------------------

def _direct_schedule(net: PartitionedNetwork):
    sched = {}
    for p in net.periphery:
        cs = net.core_neighbors(p)
        if not cs:
            return None
        sched[p] = [(1, p, min(cs))]
    return sched


def check_convergecast(net: PartitionedNetwork, gamma=DEFAULT_GAMMA) -> ConvergecastResult:
    """Exact test for a gamma-round periphery-to-core convergecast.

    When every periphery node has a core neighbour the one-hop schedule is
    returned straight away (it is feasible for every gamma >= 1).  Otherwise
    the question is settled by max-flow on the time-expanded graph.
    """
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    gamma = min(int(gamma), MAX_GAMMA)
    if not net.periphery:
        return ConvergecastResult(True, gamma, {})
    direct = _direct_schedule(net)
    if direct is not None:
        return ConvergecastResult(True, gamma, direct)

    mask = net.in_core
    G = nx.DiGraph()
    big = net.n_P
    for p in net.periphery:
        G.add_edge("src", (p, 0), capacity=1)
    for t in range(gamma):
        for p in net.periphery:
            G.add_edge((p, t), (p, t + 1), capacity=big)
            for x in net.adj[p]:
                G.add_edge((p, t), (x, t + 1), capacity=1)
    for c in net.core:
        for t in range(1, gamma + 1):
            if G.has_node((c, t)):
                G.add_edge((c, t), "sink", capacity=big)
    value, flow = nx.maximum_flow(G, "src", "sink")
    if value < net.n_P:
        return ConvergecastResult(False, gamma, None)

    # peel unit paths off the integral flow, smallest ids first
    rem = {u: {v: f for v, f in d.items() if f > 0} for u, d in flow.items()}
    sched = {}
    for p in sorted(net.periphery):
        node = (p, 0)
        hops = []
        rem["src"][node] -= 1
        while not mask[node[0]]:
            nxts = sorted((v for v, f in rem[node].items() if f > 0 and v != "sink"),
                          key=lambda x: (x[1], x[0] != node[0], x[0]))
            # prefer to move early; waiting arcs are only used when necessary
            moves = [v for v in nxts if v[0] != node[0]]
            v = moves[0] if moves else nxts[0]
            rem[node][v] -= 1
            if v[0] != node[0]:
                hops.append((v[1], node[0], v[0]))
            node = v
        sched[p] = hops
    return ConvergecastResult(True, gamma, sched)


def greedy_convergecast(net: PartitionedNetwork) -> ConvergecastResult:
    """A feasible convergecast with no round bound, for forced runs when A_C fails.

    Every periphery message follows a shortest path to its nearest core node;
    each directed edge forwards one message per round, farthest-from-core
    first.  The result's gamma is the number of rounds actually used.
    """
    mask = net.in_core
    dist = [-1] * net.n
    nxt = [-1] * net.n
    frontier = sorted(net.core)
    for c in frontier:
        dist[c] = 0
    while frontier:
        new = []
        for u in frontier:
            for x in sorted(net.adj[u]):
                if dist[x] < 0:
                    dist[x], nxt[x] = dist[u] + 1, u
                    new.append(x)
        frontier = new
    if any(dist[p] < 0 for p in net.periphery):
        raise ValueError("some periphery node cannot reach the core")
    at = {p: p for p in net.periphery}
    sched = {p: [] for p in net.periphery}
    r = 0
    while any(not mask[v] for v in at.values()):
        r += 1
        used = set()
        for p in sorted(at, key=lambda q: (-dist[at[q]], q)):
            v = at[p]
            if mask[v] or (v, nxt[v]) in used:
                continue
            used.add((v, nxt[v]))
            sched[p].append((r, v, nxt[v]))
            at[p] = nxt[v]
    return ConvergecastResult(True, max(r, 1), sched)


def schedule_for_run(net: PartitionedNetwork, report: "AxiomReport", force: bool) -> ConvergecastResult:
    """The A_C schedule, or the unbounded greedy one when the run is forced."""
    if report.convergecast.passed or not force:
        return report.convergecast
    return greedy_convergecast(net)


# -- A_E ----------------------------------------------------------------------

def _core_graph(net: PartitionedNetwork) -> nx.Graph:
    G = nx.Graph()
    G.add_nodes_from(net.core)
    mask = net.in_core
    for c in net.core:
        for x in net.adj[c]:
            if mask[x] and c < x:
                G.add_edge(c, x)
    return G


def _cut_certificate(G: nx.Graph, k: int, beta) -> str | None:
    """Look for a vertex set whose outgoing demand cannot cross its cut in beta rounds."""
    cands = []
    for x in nx.articulation_points(G):
        H = G.copy()
        H.remove_node(x)
        for comp in nx.connected_components(H):
            cands.append((frozenset(comp), f"component behind articulation node {x}"))
    for a, b in nx.bridges(G):
        H = G.copy()
        H.remove_edge(a, b)
        comp = nx.node_connected_component(H, a)
        cands.append((frozenset(comp), f"side of bridge {a}-{b}"))
    for S, why in cands:
        cut = sum(1 for s in S for y in G[s] if y not in S)
        demand = len(S) * (k - len(S))
        if cut * beta < demand:
            return f"{why}: {len(S)} nodes must send {demand} messages over a cut of {cut} edge(s)"
    return None


def _volume_certificate(G: nx.Graph, beta) -> str | None:
    """Every message needs dist(a, b) edge-rounds; compare with total capacity."""
    need = sum(d for a, row in nx.all_pairs_shortest_path_length(G) for b, d in row.items())
    cap = 2 * G.number_of_edges() * beta
    if need > cap:
        return f"all-pairs messages need {need} edge-rounds, {beta} round(s) offer {cap}"
    return None


def _greedy_emulation(G: nx.Graph, cap_rounds: int):
    """Store-and-forward all ordered pairs along shortest paths, farthest-first."""
    nodes = sorted(G.nodes)
    paths = dict(nx.all_pairs_shortest_path(G))
    pending = []
    for a in nodes:
        for b in nodes:
            if a != b:
                pending.append([paths[a][b], 0, a, b])
    schedule = []
    r = 0
    while pending:
        r += 1
        if r > cap_rounds:
            return None, r - 1
        used = set()
        hops = []
        pending.sort(key=lambda t: (-(len(t[0]) - 1 - t[1]), t[2], t[3]))
        for item in pending:
            path, i = item[0], item[1]
            e = (path[i], path[i + 1])
            if e in used:
                continue
            used.add(e)
            hops.append((e[0], e[1], item[2], item[3]))
            item[1] += 1
        pending = [t for t in pending if t[1] < len(t[0]) - 1]
        schedule.append(hops)
    return schedule, r


def check_emulation(net: PartitionedNetwork, beta=DEFAULT_BETA) -> EmulationResult:
    if beta < 1:
        raise ValueError("beta must be >= 1")
    k = net.n_C
    if k <= 1 or net.core_is_clique:
        sched = [[(a, b, a, b) for a in net.core for b in net.core if a != b]] if k > 1 else []
        return EmulationResult(Verdict.PASS, 1, "core is a clique", sched)
    for v in net.core:
        di = net.d_in(v)
        if di * beta < k - 1:
            return EmulationResult(
                Verdict.FAIL, None,
                f"node {v} has d_in={di} < (n_C-1)/beta = {Fraction(k - 1, 1) / beta}")
    G = _core_graph(net)
    if not nx.is_connected(G):
        return EmulationResult(Verdict.FAIL, None, "core is disconnected")
    cert = _cut_certificate(G, k, beta) or _volume_certificate(G, beta)
    if cert:
        return EmulationResult(Verdict.FAIL, None, cert)
    sched, rounds = _greedy_emulation(G, cap_rounds=max(4 * k, int(beta)))
    if sched is not None and rounds <= beta:
        return EmulationResult(Verdict.PASS, rounds, f"greedy schedule in {rounds} round(s)", sched)
    return EmulationResult(Verdict.UNKNOWN, None,
                           f"necessary conditions hold; greedy scheduler needed {rounds} round(s)")


def check_all(net: PartitionedNetwork, alpha=DEFAULT_ALPHA, beta=DEFAULT_BETA,
              gamma=DEFAULT_GAMMA) -> AxiomReport:
    return AxiomReport(check_balanced(net, alpha), check_emulation(net, beta),
                       check_convergecast(net, gamma), (alpha, beta, gamma))
