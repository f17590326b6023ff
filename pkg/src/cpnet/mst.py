"""Minimum spanning tree on a core-periphery network.

Boruvka-style phases where fragment bookkeeping lives at core "leaders":

    phase 0   representatives, renaming to 1..n, random balanced leaders
    step 1    neighbours swap (fragment, leader, tree-edge flag); each node
              picks its lightest outgoing edge
    step 2    nodes report to their representatives
    step 3    representatives send per-fragment minima to the fragment leaders
    step 4    leaders resolve merge trees (FindRoot, pointer jumping, release)
    step 5    leaders tell the representatives about renamed fragments
    step 6    representatives forward the news to their nodes

Fragments move through active -> frozen -> waiting -> active, or
active -> root -> active.  A root releases its tree once a phase passes
without new requests and the tree is small enough for the phase.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .axioms import DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_GAMMA, check_all, schedule_for_run
from .engine import Engine, Envelope, Payload
from .services import core_broadcast, down_wave, prepare, send_msgs, up_wave
from .topology import PartitionedNetwork, ekey

ACTIVE, FROZEN, ROOT, WAITING = "active", "frozen", "root", "waiting"
_ALLOWED = {(ACTIVE, FROZEN), (ACTIVE, ROOT), (FROZEN, WAITING), (WAITING, ACTIVE), (ROOT, ACTIVE)}

# reply codes for merge-requests
PTR, NULL, STALE = 0, 1, 2
PJ_ITERATIONS = 2
# forced runs off the axioms get this many times the usual round budget
FORCED_SLACK = 100


class AxiomCheckFailed(ValueError):
    pass


class IllegalTransition(RuntimeError):
    pass


@dataclass
class FragmentRecord:
    frag_id: int
    leader: int
    state: str = ACTIVE
    size: int = 1
    mp: int = 0
    mp_lead: int = -1
    next: int = 0
    next_lead: int = -1
    edge: tuple | None = None          # (u, v) as new ids, u inside the fragment
    reps: set = field(default_factory=set)
    sources: dict = field(default_factory=dict)   # root only: (leader, mp) -> (speaker, size)
    requests: int = 0
    since: int = 0

    def set_state(self, new: str) -> None:
        if (self.state, new) not in _ALLOWED:
            raise IllegalTransition(f"fragment {self.frag_id}: {self.state} -> {new}")
        self.state = new


@dataclass
class MSTStats:
    n: int
    m: int
    phases: int = 0
    rounds: int = 0
    phase0_rounds: int = 0
    max_edge_load: int = 0
    phase_loads: list = field(default_factory=list)
    messages: int = 0
    diagnostics: list = field(default_factory=list)
    # filled only when the run is recorded: one PhaseSnapshot per phase
    history: list = field(default_factory=list)

    def row(self) -> dict:
        return {"n": self.n, "m": self.m, "phases": self.phases, "rounds": self.rounds,
                "max_edge_load": self.max_edge_load}


@dataclass
class PhaseSnapshot:
    phase: int
    frag: tuple              # per node: fragment id at the start of the phase (new ids)
    active: dict             # fragment id -> size, for fragments active at the start
    marked: set              # tree edges (original ids) committed by the end of the phase
    mwoe: dict               # fragment id -> its mwoe (original ids) as reported this phase
    requests: list           # per request exchange: Counter of (leader, merge target)


@dataclass
class MSTResult:
    edges: set
    stats: MSTStats
    known: list                 # per node: neighbours joined to it by a tree edge
    engine: Engine

    @property
    def weight(self):
        return None


def log2ceil(n: int) -> int:
    return max(1, math.ceil(math.log2(max(n, 2))))


def round_limit_for(n: int) -> int:
    lg = log2ceil(n)
    return 10 * lg * lg


def phase_cap(n: int) -> int:
    return 2 * log2ceil(n) + 4


class _Run:
    def __init__(self, net: PartitionedNetwork, eng: Engine, sched, record=False):
        self.record = record
        self._req = []
        self.net = net
        self.eng = eng
        self.sched = sched
        n = net.n
        self.frag = [0] * n
        self.lead = [0] * n
        self.marked = [set() for _ in range(n)]
        self.nb = [dict() for _ in range(n)]      # v -> (frag, lead) as heard this phase
        self.ledger: dict[int, dict[int, FragmentRecord]] = {}
        self.tomb: dict[int, dict[int, tuple]] = {}
        self.stats = MSTStats(n, net.m)

    # -- phase 0 ---------------------------------------------------------------
    def phase0(self):
        net, eng = self.net, self.eng
        core_sorted = sorted(net.core)
        seed_word = int(eng.rng(core_sorted[0]).integers(0, 2 ** 32))
        k = net.n_C

        def leaders(new_id, word):
            perm = _leader_perm(word, net.n)
            return {v: (core_sorted[perm[new_id[v] - 1] % k],) for v in net.periphery}

        with eng.tag("phase0"):
            st, _ = prepare(eng, self.sched, extra_word=seed_word, annotate=leaders)
        self.setup = st
        self.nid = st.new_id
        self.node_of = st.node_of
        self.rep = st.reps.rep
        perm = _leader_perm(seed_word, net.n)
        for v in range(net.n):
            self.frag[v] = self.nid[v]
            self.lead[v] = core_sorted[perm[self.nid[v] - 1] % k]
        for w in net.core:
            self.ledger[w] = {}
            self.tomb[w] = {}
        for v in range(net.n):
            self.ledger[self.lead[v]][self.nid[v]] = FragmentRecord(self.nid[v], self.lead[v])
        # neighbours learn each other's new ids
        with eng.tag("phase0"):
            eng.deliver(Envelope(u, v, Payload("id", (self.nid[u],)))
                        for u in range(net.n) for v in net.adj[u])
        # edges in the total order (weight, min id, max id), lightest first per node
        w = net.weights
        nid = self.nid
        self.order = []
        for u in range(net.n):
            lst = []
            for v in net.adj[u]:
                a, b = nid[u], nid[v]
                lst.append(((w[ekey(u, v)], min(a, b), max(a, b)), v))
            lst.sort()
            self.order.append(lst)
        self.stats.phase0_rounds = eng.round

    # -- steps 1 and 2 -----------------------------------------------------------
    def exchange(self):
        net, frag, lead, marked = self.net, self.frag, self.lead, self.marked
        envs = []
        for u in range(net.n):
            fu, lu, mk = frag[u], lead[u], marked[u]
            for v in net.adj[u]:
                envs.append(Envelope(u, v, Payload("nb", (fu, lu, 1 if v in mk else 0))))
        inbox = self.eng.deliver(envs)
        for v, lst in inbox.items():
            d = self.nb[v]
            for e in lst:
                f, l, flag = e.payload.words
                d[e.src] = (f, l)
                if flag:
                    marked[v].add(e.src)

    def local_mwoe(self, u):
        fu = self.frag[u]
        nb = self.nb[u]
        for key, v in self.order[u]:
            fv, lv = nb[v]
            if fv != fu:
                return (key[0], self.nid[u], self.nid[v], fv, lv)
        return None

    # -- main loop -----------------------------------------------------------------
    def run(self) -> MSTResult:
        net, eng = self.net, self.eng
        self.phase0()
        if net.n == 1:
            return self._finish(0)
        cap = 4 * log2ceil(net.n) + 16
        b = 0
        while True:
            b += 1
            if b > cap:
                raise RuntimeError(f"no termination after {cap} phases")
            if self.record:
                snap = self._snapshot(b)
            with eng.tag(f"p{b}:s1"):
                self.exchange()
            reports = {u: self.local_mwoe(u) for u in range(net.n)}
            with eng.tag(f"p{b}:s2"):
                got = up_wave(eng, self.setup.reps, {
                    p: Payload("mwoe", reports[p]) if reports[p] else Payload("none", ())
                    for p in net.periphery})
            with eng.load_window() as load:
                with eng.tag(f"p{b}:s3"):
                    done = self.step3(reports)
                if done:
                    self.stats.phase_loads.append(max(load.values(), default=0))
                    if self.record:
                        self._close(snap, reports)
                    return self._finish(b)
                with eng.tag(f"p{b}:s4"):
                    updates = self.step4(b)
                with eng.tag(f"p{b}:s5"):
                    to_nodes = self.step5(updates)
            self.stats.phase_loads.append(max(load.values(), default=0))
            with eng.tag(f"p{b}:s6"):
                self.step6(to_nodes)
            if self.record:
                self._close(snap, reports)
            for w, recs in self.ledger.items():
                for rec in recs.values():
                    if rec.state == WAITING and b - rec.since > 2 * log2ceil(net.n):
                        self.stats.diagnostics.append(
                            f"phase {b}: fragment {rec.frag_id} waiting since phase {rec.since}")

    def _snapshot(self, b):
        self._req = []
        active = {}
        for recs in self.ledger.values():
            for rec in recs.values():
                if rec.state == ACTIVE:
                    active[rec.frag_id] = 0
        for f in self.frag:
            if f in active:
                active[f] += 1
        return PhaseSnapshot(b, tuple(self.frag), active, set(), {}, [])

    def _close(self, snap, reports):
        node_of = self.node_of
        best = {}
        for u in range(self.net.n):
            r = reports[u]
            if r is not None:
                f = snap.frag[u]
                if f not in best or r < best[f]:
                    best[f] = r
        snap.mwoe = {f: ekey(node_of[r[1]], node_of[r[2]]) for f, r in best.items()}
        snap.marked = {ekey(u, v) for u in range(self.net.n) for v in self.marked[u]}
        snap.requests = self._req
        self.stats.history.append(snap)

    # -- step 3 ----------------------------------------------------------------------
    def step3(self, reports) -> bool:
        """Representatives send per-fragment minima to leaders; True when finished."""
        net = self.net
        by_rep: dict[int, dict[int, list]] = {}
        for u in range(net.n):
            by_rep.setdefault(self.rep[u], {}).setdefault(self.frag[u], []).append(u)
        msgs = []
        for w, groups in by_rep.items():
            for f, nodes in groups.items():
                best = min((reports[u] for u in nodes if reports[u] is not None), default=None)
                lf = self.lead[nodes[0]]
                if best is None:
                    msgs.append((w, lf, Payload("rnone", (f,))))
                else:
                    msgs.append((w, lf, Payload("rpt", (f,) + best)))
        got, _ = send_msgs(self.eng, msgs)
        heard: dict[tuple, list] = {}
        for leader, lst in got.items():
            for src, pl in lst:
                heard.setdefault((leader, pl.words[0]), []).append((src, pl))
        finished = False
        for (leader, f), lst in heard.items():
            rec = self.ledger[leader].get(f)
            if rec is None:
                self.stats.diagnostics.append(f"report for unknown fragment {f} at {leader}")
                continue
            rec.reps = {src for src, _ in lst}
            best = min((pl.words[1:] for _, pl in lst if pl.kind == "rpt"), default=None)
            if rec.state == ACTIVE:
                if best is None:
                    finished = True
                else:
                    _, u, v, fv, lv = best
                    rec.mp, rec.mp_lead, rec.edge = fv, lv, (u, v)
        return finished

    # -- step 4 ----------------------------------------------------------------------
    def _exchange_requests(self, requests):
        """Deliver merge-requests, let targets answer, deliver replies.

        `requests` holds (leader, target leader, target, speaker, speaker's mp, group size).
        Returns {(leader, speaker): (code, next, next leader)}.
        """
        msgs = [(w, tl, Payload("req", (t, spk, mp, size))) for w, tl, t, spk, mp, size in requests]
        if self.record:
            self._req.append(Counter((w, mp) for w, _, _, _, mp, _ in requests))
        got, _ = send_msgs(self.eng, msgs)
        replies = []
        for tl, lst in got.items():
            for src, pl in lst:
                t, spk, mp, size = pl.words
                rec = self.ledger[tl].get(t)
                if rec is None:
                    new = self.tomb[tl].get(t)
                    self.stats.diagnostics.append(f"request to retired fragment {t}")
                    code, nx, nl = (STALE,) + (new if new else (t, tl))
                elif rec.state == ACTIVE:
                    code, nx, nl = PTR, rec.mp, rec.mp_lead
                elif rec.state == ROOT:
                    code, nx, nl = NULL, 0, 0
                    rec.requests += 1
                    old = rec.sources.get((src, mp))
                    if old is None or old[1] < size:
                        rec.sources[(src, mp)] = (spk, size)
                else:
                    code, nx, nl = PTR, rec.next, rec.next_lead
                replies.append((tl, src, Payload("rpl", (spk, code, nx, nl))))
        got, _ = send_msgs(self.eng, replies)
        out = {}
        for w, lst in got.items():
            for _, pl in lst:
                spk, code, nx, nl = pl.words
                out[(w, spk)] = (code, nx, nl)
        return out

    def step4(self, b):
        ledger = self.ledger
        for recs in ledger.values():
            for rec in recs.values():
                rec.requests = 0
        # FindRoot: one speaker per (leader, target) among the fragments turning frozen
        requests = []
        groups = {}
        for w, recs in ledger.items():
            by_mp: dict[int, list] = {}
            for rec in recs.values():
                if rec.state == ACTIVE:
                    by_mp.setdefault(rec.mp, []).append(rec)
            for j, act in by_mp.items():
                spk = min(act, key=lambda r: r.frag_id)
                groups[(w, spk.frag_id)] = act
                requests.append((w, spk.mp_lead, j, spk.frag_id, j, sum(r.size for r in act)))
        replies = self._exchange_requests(requests)
        for (w, spk_id), act in groups.items():
            code, nx, nl = replies[(w, spk_id)]
            j = act[0].mp
            root = None
            if code == PTR:
                rec = ledger[w].get(nx)
                if rec is not None and rec.mp == j and nx <= j:
                    root = rec
            for rec in act:
                if rec is root:
                    continue
                rec.set_state(FROZEN)
                rec.next, rec.next_lead = j, rec.mp_lead
            if root is not None:
                if root.state == ACTIVE:
                    root.set_state(ROOT)
                elif root.state != ROOT:
                    self.stats.diagnostics.append(f"root candidate {root.frag_id} is {root.state}")

        # pointer jumping for frozen groups
        for _ in range(PJ_ITERATIONS):
            requests = []
            groups = {}
            for w, recs in ledger.items():
                by_mp: dict[int, list] = {}
                for rec in recs.values():
                    if rec.state == FROZEN:
                        by_mp.setdefault(rec.mp, []).append(rec)
                for j, fr in by_mp.items():
                    spk = min(fr, key=lambda r: r.frag_id)
                    groups[(w, spk.frag_id)] = fr
                    requests.append((w, spk.next_lead, spk.next, spk.frag_id, j,
                                     sum(r.size for r in fr)))
            if not requests:
                break
            replies = self._exchange_requests(requests)
            for (w, spk_id), fr in groups.items():
                code, nx, nl = replies[(w, spk_id)]
                if code == NULL:
                    for rec in fr:
                        rec.set_state(WAITING)
                        rec.next, rec.next_lead = ledger[w][spk_id].next, ledger[w][spk_id].next_lead
                        rec.since = b
                else:
                    for rec in fr:
                        rec.next, rec.next_lead = nx, nl

        # roots release quiet, small trees
        fin = []
        assign = []
        updates = []
        bound = 2 ** (2 + b)
        core_sorted = sorted(self.net.core)
        for w, recs in ledger.items():
            for rec in list(recs.values()):
                if rec.state != ROOT or rec.requests:
                    continue
                size = rec.size + sum(s for _, s in rec.sources.values())
                if size > bound:
                    continue
                rng = self.eng.rng(w)
                cands = [rec.frag_id] + sorted({spk for spk, _ in rec.sources.values()})
                new_id = int(cands[int(rng.integers(len(cands)))])
                new_lead = core_sorted[int(rng.integers(len(core_sorted)))]
                for (src, _), (spk, _) in sorted(rec.sources.items()):
                    fin.append((w, src, Payload("fin", (spk, new_id, new_lead))))
                assign.append((w, new_lead, Payload("lead", (new_id, size))))
                rec.set_state(ACTIVE)
                updates.append((w, rec, new_id, new_lead, None))
        got, _ = send_msgs(self.eng, fin + assign)
        created = []
        for w, lst in got.items():
            for _, pl in lst:
                if pl.kind == "fin":
                    spk, new_id, new_lead = pl.words
                    srec = ledger[w].get(spk)
                    if srec is None:
                        continue
                    for rec in [r for r in ledger[w].values() if r.mp == srec.mp and r.state == WAITING]:
                        rec.set_state(ACTIVE)
                        updates.append((w, rec, new_id, new_lead, rec.edge))
                else:
                    created.append((w, pl.words))
        for w, rec, new_id, new_lead, _ in updates:
            ledger[w].pop(rec.frag_id, None)
            self.tomb[w][rec.frag_id] = (new_id, new_lead)
        for w, (new_id, size) in created:
            ledger[w][new_id] = FragmentRecord(new_id, w, size=size)
        return updates

    # -- steps 5 and 6 ---------------------------------------------------------------
    def step5(self, updates):
        msgs = []
        for w, rec, new_id, new_lead, edge in updates:
            words = (rec.frag_id, new_id, new_lead) + (edge if edge else ())
            for r in sorted(rec.reps):
                msgs.append((w, r, Payload("upd", words)))
        got, _ = send_msgs(self.eng, msgs)
        news = {}
        for r, lst in got.items():
            for _, pl in lst:
                news[(r, pl.words[0])] = pl.words[1:]
        to_nodes = {}
        for u in range(self.net.n):
            item = news.get((self.rep[u], self.frag[u]))
            if item is not None:
                to_nodes[u] = item
        return to_nodes

    def step6(self, to_nodes):
        down = {}
        for u, item in to_nodes.items():
            new_id, new_lead = item[0], item[1]
            mark = 0
            if len(item) == 4 and item[2] == self.nid[u]:
                mark = item[3]
            if self.net.in_core[u]:
                self._apply(u, new_id, new_lead, mark)
            else:
                down[u] = Payload("upd", (new_id, new_lead, mark))
        down_wave(self.eng, self.setup.reps, down)
        for u, pl in down.items():
            self._apply(u, *pl.words)

    def _apply(self, u, new_id, new_lead, mark):
        self.frag[u] = new_id
        self.lead[u] = new_lead
        if mark:
            self.marked[u].add(self.node_of[mark])

    # -- termination -------------------------------------------------------------------
    def _finish(self, b):
        net, eng = self.net, self.eng
        if net.n > 1:
            first = sorted(net.core)[0]
            with eng.tag("done"):
                core_broadcast(eng, {first: [Payload("done", ())]})
                down_wave(eng, self.setup.reps, {p: Payload("done", ()) for p in net.periphery})
                self.exchange()
        st = self.stats
        st.phases = b
        st.rounds = eng.round
        st.messages = eng.messages
        st.max_edge_load = max(st.phase_loads, default=0)
        edges = {ekey(u, v) for u in range(net.n) for v in self.marked[u]}
        return MSTResult(edges, st, [set(m) for m in self.marked], eng)


def _leader_perm(word, n):
    import numpy as np
    return np.random.default_rng(int(word)).permutation(n).tolist()


def run_cp_mst(net: PartitionedNetwork, seed: int = 0, round_limit: int | None = None,
               force: bool = False, gamma: int = DEFAULT_GAMMA, alpha: int = DEFAULT_ALPHA,
               beta: int = DEFAULT_BETA, record: bool = False) -> MSTResult:
    """Run the core-periphery MST algorithm; returns the tree edges (original ids) and stats.

    Raises AxiomCheckFailed unless the network satisfies the three axioms or
    `force` is set.  The round limit defaults to 10 * ceil(log2 n)^2, or
    FORCED_SLACK times that for forced runs.
    """
    if net.weights is None:
        raise ValueError("network has no edge weights")
    report = check_all(net, alpha=alpha, beta=beta, gamma=gamma)
    if report.failures and not force:
        raise AxiomCheckFailed(report.summary())
    if round_limit is None:
        round_limit = round_limit_for(net.n) * (FORCED_SLACK if force else 1)
    eng = Engine(net, seed, round_limit=round_limit)
    return _Run(net, eng, schedule_for_run(net, report, force), record).run()
