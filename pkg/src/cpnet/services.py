"""Sub-protocols shared by the algorithms.

* representatives and renaming (periphery nodes pick a core contact, ids become 1..n)
* waves up and down the convergecast routes, single-shot or pipelined
* SendMsg: bulk delivery between core nodes
* core_sort: distributed sorting inside the core (value learning / index learning)
"""
from __future__ import annotations

import bisect
import math
from collections import deque
from dataclasses import dataclass, field

from .axioms import ConvergecastResult, check_convergecast
from .engine import MAX_WORDS, Engine, Envelope, Payload
from .topology import PartitionedNetwork

# rounds(send_msgs) <= SENDMSG_C * (ceil(M_s/n_C) + ceil(M_r/n_C) + 1) on clique cores
SENDMSG_C = 2
# a core node may be handed at most SORT_LOAD_FACTOR * n_C keys
SORT_LOAD_FACTOR = 4
# regular samples each core node contributes as splitter candidates
SORT_SAMPLES = 4
KEY_WIDTH = 3
# rounds spent by one core_sort call at our load factors must stay below this
SORT_ROUND_CAP = 60


_SPLIT = 1 << 20


class ScheduleMissing(RuntimeError):
    pass


class DestinationOutsideCore(ValueError):
    pass


class LoadExceeded(ValueError):
    pass


class SendMsgBoundExceeded(AssertionError):
    pass


# -- representatives ----------------------------------------------------------

@dataclass
class RepresentativeMap:
    rep: list[int]
    # node -> list of (round, from, to) hops toward its representative
    route: dict[int, list[tuple[int, int, int]]]

    def represented(self, w: int) -> list[int]:
        return [v for v, r in enumerate(self.rep) if r == w]

    def groups(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for v, r in enumerate(self.rep):
            out.setdefault(r, []).append(v)
        return out

    def max_load(self) -> int:
        """Largest number of periphery nodes served by one core node."""
        g = self.groups()
        return max((len(vs) - 1 for vs in g.values()), default=0)

    def path(self, v: int) -> list[int]:
        hops = self.route.get(v) or []
        if not hops:
            return [v]
        return [hops[0][1]] + [h[2] for h in hops]


def _schedule_or_raise(sched: ConvergecastResult | None):
    if sched is None or not sched.passed or sched.schedule is None:
        raise ScheduleMissing("no convergecast schedule available")
    return sched.schedule


def assign_representatives(engine: Engine, sched: ConvergecastResult | None) -> RepresentativeMap:
    """Each periphery node sends a request along its route; the receiving core node replies.

    Costs at most 2*gamma rounds.  Ties between several reachable core nodes
    were already settled when the schedule was built (smallest core id).
    """
    net = engine.net
    routes = _schedule_or_raise(sched)
    rep = list(range(net.n))
    for p, hops in routes.items():
        rep[p] = hops[-1][2]
    rm = RepresentativeMap(rep, dict(routes))
    with engine.tag("rep-request"):
        got = up_wave(engine, rm, {p: Payload("rep-req", ()) for p in net.periphery})
    with engine.tag("rep-reply"):
        down_wave(engine, rm, {p: Payload("rep-ack", ()) for w, items in got.items() for p, _ in items})
    return rm


# -- waves along convergecast routes ------------------------------------------

def up_wave(engine: Engine, rm: RepresentativeMap, payloads: dict[int, Payload]):
    """Replay the convergecast schedule once: each periphery payload reaches its representative.

    Returns {core node: [(origin, payload), ...]} in origin order.
    """
    moves: dict[int, list] = {}
    for p in sorted(payloads):
        for t, a, b in rm.route.get(p, ()):
            moves.setdefault(t, []).append(Envelope(a, b, payloads[p], rm.rep[p], p))
    _replay(engine, moves)
    out: dict[int, list] = {}
    for p in sorted(payloads):
        if rm.route.get(p):
            out.setdefault(rm.rep[p], []).append((p, payloads[p]))
    return out


def down_wave(engine: Engine, rm: RepresentativeMap, payloads: dict[int, Payload]) -> dict[int, Payload]:
    """Replay the schedule backwards in time; each representative reaches its nodes."""
    horizon = 0
    for p in payloads:
        hops = rm.route.get(p)
        if hops:
            horizon = max(horizon, hops[-1][0])
    moves: dict[int, list] = {}
    for p in sorted(payloads):
        for t, a, b in rm.route.get(p, ()):
            moves.setdefault(horizon + 1 - t, []).append(Envelope(b, a, payloads[p], p, rm.rep[p]))
    _replay(engine, moves)
    return dict(payloads)


def _replay(engine: Engine, moves: dict[int, list]) -> None:
    if not moves:
        return
    for t in range(1, max(moves) + 1):
        engine.deliver(moves.get(t, ()))


def route_packets(engine: Engine, packets) -> tuple[dict[int, list], int]:
    """Store-and-forward along fixed paths; every directed edge forwards its oldest packet.

    `packets` is a sequence of (path, payload, origin).  Returns ({final node:
    [(origin, payload), ...]}, rounds used).
    """
    arrived: dict[int, list] = {}
    queues: dict[tuple[int, int], deque] = {}
    pos = []
    for idx, (path, payload, origin) in enumerate(packets):
        pos.append(0)
        if len(path) <= 1:
            arrived.setdefault(path[-1], []).append((origin, payload))
            continue
        key = (path[0], path[1])
        q = queues.get(key)
        if q is None:
            q = queues[key] = deque()
        q.append(idx)
    start = engine.round
    while queues:
        envs = []
        moved = []
        for key, q in queues.items():
            idx = q.popleft()
            path, payload, origin = packets[idx]
            envs.append(Envelope(key[0], key[1], payload, path[-1], origin))
            moved.append(idx)
        queues = {k: q for k, q in queues.items() if q}
        engine.deliver(envs)
        for idx in moved:
            path, payload, origin = packets[idx]
            i = pos[idx] = pos[idx] + 1
            if i == len(path) - 1:
                arrived.setdefault(path[-1], []).append((origin, payload))
            else:
                key = (path[i], path[i + 1])
                q = queues.get(key)
                if q is None:
                    q = queues[key] = deque()
                q.append(idx)
    return arrived, engine.round - start


def up_stream(engine: Engine, rm: RepresentativeMap, items: dict[int, list[Payload]]):
    """Pipeline several payloads per node toward the representatives.

    A row of k payloads over a route of length g costs g + k - 1 rounds when
    routes do not share edges.  Core nodes deliver to themselves for free.
    """
    packets = []
    for v in sorted(items):
        path = rm.path(v)
        for pl in items[v]:
            packets.append((path, pl, v))
    got, _ = route_packets(engine, packets)
    return got


def down_stream(engine: Engine, rm: RepresentativeMap, items: dict[int, list[Payload]]):
    """Pipeline payloads from each representative to the listed nodes."""
    packets = []
    for v in sorted(items):
        path = rm.path(v)[::-1]
        for pl in items[v]:
            packets.append((path, pl, rm.rep[v]))
    got, _ = route_packets(engine, packets)
    return got


def convergecast(engine: Engine, rm: RepresentativeMap | None, values: dict[int, list[int]]):
    """Deliver each periphery node's values to its representative.

    Returns ({core node: {origin: [values...]}}, rounds used).  One value per
    node replays the schedule exactly; longer rows are pipelined.
    """
    if rm is None:
        raise ScheduleMissing("no convergecast schedule available")
    start = engine.round
    items = {v: [Payload("cc", (i, x)) for i, x in enumerate(vals)] for v, vals in values.items()}
    if all(len(v) <= 1 for v in items.values()):
        got = up_wave(engine, rm, {v: pl[0] for v, pl in items.items() if pl})
        for v, pl in items.items():
            if pl and not rm.route.get(v):
                got.setdefault(rm.rep[v], []).append((v, pl[0]))
    else:
        got = up_stream(engine, rm, items)
    out: dict[int, dict[int, list]] = {}
    for w, lst in got.items():
        for origin, pl in lst:
            out.setdefault(w, {}).setdefault(origin, []).append(pl.words)
    res = {w: {o: [x for _, x in sorted(ws)] for o, ws in d.items()} for w, d in out.items()}
    return res, engine.round - start


# -- setup shared by all algorithms ---------------------------------------------

@dataclass
class Setup:
    """Representatives plus the 1..n renaming with core nodes first."""

    net: PartitionedNetwork
    reps: RepresentativeMap
    new_id: list[int]
    core_order: list[int]            # core NodeIds sorted by new id
    node_of: dict[int, int] = field(default_factory=dict)   # new id -> NodeId
    rounds: int = 0

    def core_index(self, w: int) -> int:
        return self.new_id[w] - 1


def prepare(engine: Engine, sched: ConvergecastResult | None = None, gamma: int = 2,
            extra_word: int | None = None, annotate=None) -> tuple[Setup, dict]:
    """Obtain representatives and rename nodes to 1..n.

    Every core node announces (own id, number of represented nodes) to the
    rest of the core; all of them then agree on contiguous id ranges.
    `extra_word`, if given, rides along with the smallest core node's
    announcement (used to share a random seed).  `annotate(new_id, word)`
    may return extra words per periphery node that ride along with its new id.
    Returns (setup, words heard by each core node from the smallest core node).
    """
    net = engine.net
    start = engine.round
    if sched is None:
        sched = check_convergecast(net, gamma)
    rm = assign_representatives(engine, sched)
    groups = rm.groups()
    first = min(net.core)
    msgs = []
    for w in net.core:
        words = (len(groups.get(w, ())),)
        if w == first and extra_word is not None:
            words = words + (extra_word,)
        for x in net.core:
            if x != w:
                msgs.append((w, x, Payload("count", words)))
    with engine.tag("rename"):
        got, _ = send_msgs(engine, msgs)
    counts = {first: len(groups.get(first, ()))}
    shared = {}
    for w, lst in got.items():
        for src, pl in lst:
            counts[src] = pl.words[0]
            if src == first:
                shared[w] = pl.words[1:]
    core_order = sorted(net.core)
    new_id = [0] * net.n
    nxt = len(core_order) + 1
    for i, w in enumerate(core_order):
        new_id[w] = i + 1
    for w in core_order:
        for v in sorted(groups.get(w, ())):
            if v != w:
                new_id[v] = nxt
                nxt += 1
    extra = annotate(new_id, extra_word) if annotate else {}
    with engine.tag("rename"):
        down_wave(engine, rm, {p: Payload("newid", (new_id[p],) + tuple(extra.get(p, ())))
                               for p in net.periphery})
    st = Setup(net, rm, new_id, core_order, {new_id[v]: v for v in range(net.n)},
               engine.round - start)
    return st, shared


# -- SendMsg --------------------------------------------------------------------

@dataclass
class SendStats:
    rounds: int = 0
    M_s: int = 0
    M_r: int = 0
    messages: int = 0
    relay_load: dict = field(default_factory=dict)
    bound: int = 0


def _bipartite_coloring(edges, ncolors):
    """Proper edge colouring of a bipartite multigraph with max degree <= ncolors.

    Left vertices are ints >= 0, right vertices are ~int (negative).  Classic
    alternating-path method.
    """
    at: dict[int, list] = {}
    color = [-1] * len(edges)

    def slots(x):
        s = at.get(x)
        if s is None:
            s = at[x] = [-1] * ncolors
        return s

    for ei, (u, v) in enumerate(edges):
        su, sv = slots(u), slots(v)
        a = su.index(-1)
        if sv[a] == -1:
            su[a] = sv[a] = ei
            color[ei] = a
            continue
        b = sv.index(-1)
        # walk the a/b path starting at v, then swap its colours
        path = []
        x, c = v, a
        while True:
            e = slots(x)[c]
            if e == -1:
                break
            path.append(e)
            p, q = edges[e]
            x = q if p == x else p
            c = b if c == a else a
        for e in path:
            p, q = edges[e]
            at[p][color[e]] = -1
            at[q][color[e]] = -1
        for e in path:
            nc = b if color[e] == a else a
            color[e] = nc
            p, q = edges[e]
            at[p][nc] = e
            at[q][nc] = e
        su[a] = sv[a] = ei
        color[ei] = a
    return color


def _core_paths(engine: Engine) -> dict:
    cache = getattr(engine, "_core_paths", None)
    if cache is not None:
        return cache
    net = engine.net
    mask = net.in_core
    paths = {}
    for s in net.core:
        par = {s: None}
        q = deque([s])
        while q:
            x = q.popleft()
            for y in net.adj[x]:
                if mask[y] and y not in par:
                    par[y] = x
                    q.append(y)
        paths[s] = par
    engine._core_paths = paths
    return paths


def _path_in_core(paths, s, d):
    par = paths[s]
    if d not in par:
        raise DestinationOutsideCore(f"core node {d} unreachable from {s} inside the core")
    out = [d]
    while out[-1] != s:
        out.append(par[out[-1]])
    return out[::-1]


def _two_hop_plan(engine: Engine, remote, k):
    """Every message goes through a relay picked by colouring; see send_msgs."""
    net = engine.net
    order = sorted(range(len(remote)), key=lambda i: (remote[i][0], remote[i][1], i))
    # split senders and receivers into chunks of k messages
    scount: dict = {}
    rcount: dict = {}
    edges = []
    chunks = []
    for i in order:
        s, d, _ = remote[i]
        cs = scount.get(s, 0)
        cr = rcount.get(d, 0)
        scount[s] = cs + 1
        rcount[d] = cr + 1
        chunks.append((cs // k, cr // k))
        edges.append((s * _SPLIT + cs // k, ~(d * _SPLIT + cr // k)))
    colors = _bipartite_coloring(edges, k)
    perm = engine.rng("sendmsg").permutation(sorted(net.core)).tolist()
    # sender chunk q uses round q+1 for the first hop, receiver chunk r uses
    # round Q+r+1 for the second; colours keep every edge to one packet per round
    Q = max(q for q, _ in chunks) + 1
    moves: dict[int, list] = {}
    relay: dict = {}
    for j, i in enumerate(order):
        s, d, pl = remote[i]
        q, r = chunks[j]
        mid = perm[colors[j]]
        relay[mid] = relay.get(mid, 0) + 1
        if mid != s:
            moves.setdefault(q + 1, []).append(Envelope(s, mid, pl, d, s))
        if mid != d:
            moves.setdefault(Q + r + 1, []).append(Envelope(mid, d, pl, d, s))
    return moves, relay


def _hybrid_plan(engine: Engine, remote, pairs, k, st, limit):
    """Direct sends for the first T messages of every pair, relays for the rest.

    T is the smallest round count any plan could reach given the per-node
    loads.  Each surplus message takes the relay with the earliest possible
    arrival, using edge slots the direct traffic leaves free.  Returns
    (moves, relay loads), or (None, None) when the plan would need `limit`
    rounds or more.
    """
    T = max(1, math.ceil(st.M_s / (k - 1)), math.ceil(st.M_r / (k - 1)))
    busy: dict = {}
    moves: dict[int, list] = {}
    surplus = []
    for (s, d), idx in pairs.items():
        for t, i in enumerate(idx):
            if t < T:
                moves.setdefault(t + 1, []).append(Envelope(s, d, remote[i][2], d, s))
                busy.setdefault((s, d), set()).add(t + 1)
            else:
                surplus.append(i)
    if not surplus:
        return (moves, {}) if T < limit else (None, None)
    mids = engine.rng("sendmsg").permutation(sorted(engine.net.core)).tolist()
    nm = len(mids)
    relay: dict = {}
    for n_i, i in enumerate(surplus):
        s, d, pl = remote[i]
        best = None
        for off in range(nm):
            mid = mids[(n_i + off) % nm]
            if mid == s or mid == d:
                continue
            used1 = busy.get((s, mid), ())
            r1 = 1
            while r1 in used1:
                r1 += 1
            used2 = busy.get((mid, d), ())
            r2 = r1 + 1
            while r2 in used2:
                r2 += 1
            if best is None or r2 < best[0]:
                best = (r2, r1, mid)
                if r2 <= 2:
                    break
        r2, r1, mid = best
        if r2 >= limit:
            return None, None
        busy.setdefault((s, mid), set()).add(r1)
        busy.setdefault((mid, d), set()).add(r2)
        moves.setdefault(r1, []).append(Envelope(s, mid, pl, d, s))
        moves.setdefault(r2, []).append(Envelope(mid, d, pl, d, s))
        relay[mid] = relay.get(mid, 0) + 1
    return moves, relay


def send_msgs(engine: Engine, msgs, check_bound: bool = True, plan: str = "auto"):
    """Deliver (src, dst, payload) triples between core nodes.

    The relay plan on a clique core sends every message through an
    intermediate core node.  Intermediates come from a proper colouring of the
    sender/receiver multigraph (vertices split into chunks of n_C messages),
    with colours mapped to core nodes by a fresh random permutation, so each
    message's relay is uniform and every sender-relay and relay-receiver edge
    carries at most ceil(M_s/n_C) resp. ceil(M_r/n_C) messages.  Other cores
    fall back to shortest paths inside the core.

    With plan="auto" the cheapest of three plans runs: all messages on their
    direct edge, the relay plan above, or direct sends topped up with relays
    for pairs that carry many messages.  plan="direct" and plan="two-hop"
    force one of the first two.

    Returns ({dst: [(src, payload), ...]}, SendStats).
    """
    if plan not in ("auto", "direct", "two-hop"):
        raise ValueError(f"unknown plan {plan!r}")
    net = engine.net
    mask = net.in_core
    k = net.n_C
    out: dict[int, list] = {}
    remote = []
    sent = {}
    recv = {}
    for s, d, pl in msgs:
        if not mask[d]:
            raise DestinationOutsideCore(f"destination {d} is not a core node")
        if not mask[s]:
            raise DestinationOutsideCore(f"source {s} is not a core node")
        if s == d:
            out.setdefault(d, []).append((s, pl))
            continue
        remote.append((s, d, pl))
        sent[s] = sent.get(s, 0) + 1
        recv[d] = recv.get(d, 0) + 1
    st = SendStats(M_s=max(sent.values(), default=0), M_r=max(recv.values(), default=0),
                   messages=len(remote))
    if not remote:
        return out, st

    packets = []
    if net.core_is_clique:
        pairs: dict = {}
        for i, (s, d, _) in enumerate(remote):
            pairs.setdefault((s, d), []).append(i)
        two_hop = math.ceil(st.M_s / k) + math.ceil(st.M_r / k)
        direct = max(len(v) for v in pairs.values())
        moves = None
        if plan == "auto" and direct > 1:
            moves, relay = _hybrid_plan(engine, remote, pairs, k, st, limit=min(direct, two_hop))
        if plan == "direct" or (plan == "auto" and moves is None and direct <= two_hop):
            moves, relay = {}, {}
            for (s, d), idx in pairs.items():
                for t, i in enumerate(idx):
                    moves.setdefault(t + 1, []).append(Envelope(s, d, remote[i][2], d, s))
        if moves is None:
            moves, relay = _two_hop_plan(engine, remote, k)
        st.relay_load = relay
        for s, d, pl in remote:
            out.setdefault(d, []).append((s, pl))
        start = engine.round
        _replay(engine, moves)
        st.rounds = engine.round - start
        st.bound = SENDMSG_C * (two_hop + 1)
        if check_bound and st.rounds > st.bound:
            raise SendMsgBoundExceeded(f"send_msgs used {st.rounds} rounds > bound {st.bound}")
        return out, st
    paths = _core_paths(engine)
    for s, d, pl in remote:
        packets.append((_path_in_core(paths, s, d), pl, s))

    got, rounds = route_packets(engine, packets)
    for d, lst in got.items():
        out.setdefault(d, []).extend(lst)
    st.rounds = rounds
    st.bound = SENDMSG_C * (math.ceil(st.M_s / k) + math.ceil(st.M_r / k) + 1)
    if check_bound and net.core_is_clique and rounds > st.bound:
        raise SendMsgBoundExceeded(f"send_msgs used {rounds} rounds > bound {st.bound}")
    return out, st


def core_broadcast(engine: Engine, items: dict[int, list[Payload]]):
    """Every listed core node sends each of its payloads to every other core node."""
    net = engine.net
    msgs = [(w, x, pl) for w in sorted(items) for pl in items[w] for x in net.core if x != w]
    got, st = send_msgs(engine, msgs)
    return got, st


# -- sorting inside the core -------------------------------------------------------

@dataclass
class SortResult:
    # VL: core node -> its contiguous block of the global order (keys)
    blocks: dict[int, list[tuple]]
    # IL: core node -> {key: global rank (1-based)} for the keys it supplied
    ranks: dict[int, dict[tuple, int]]
    block_size: int
    total: int
    rounds: int


def _staggered(seq, count, off):
    """`count` evenly spaced picks starting at fraction `off` of the first gap.

    Nodes use different offsets so that, pooled together, their picks spread
    over the whole range instead of piling up at the same quantiles.
    """
    L = len(seq)
    if L <= count:
        return list(seq)
    return [seq[min(L - 1, int((t + off) * L / count))] for t in range(count)]


def _offset(i: int, p: int) -> float:
    """Sampling offset of the i-th core node.

    Offsets are the p evenly spaced fractions (j + 0.5)/p, dealt out with a
    golden-ratio stride so that nodes with neighbouring ids, which often hold
    neighbouring keys, sample far-apart local quantiles.
    """
    g = max(1, round(p * 0.618034))
    while math.gcd(g, p) != 1:
        g += 1
    return ((i * g) % p + 0.5) / p


def packed_send(engine: Engine, *families):
    """send_msgs for fixed-width word records, as many per payload as fit.

    Each family is (kind, width, {(src, dst): [record, ...]}) with an
    optional fourth element capping the records per payload; all families
    travel in one batch.  Returns one {dst: [(src, record), ...]} map per
    family, records in sending order.
    """
    msgs = []
    for fam in families:
        kind, width, groups = fam[:3]
        per = fam[3] if len(fam) > 3 else None
        for (s, d) in sorted(groups):
            for words in _pack(groups[(s, d)], width, per):
                msgs.append((s, d, Payload(kind, words)))
    got, _ = send_msgs(engine, msgs)
    index = {fam[0]: i for i, fam in enumerate(families)}
    res = [{} for _ in families]
    for d, lst in got.items():
        for src, pl in lst:
            i = index[pl.kind]
            width = families[i][1]
            res[i].setdefault(d, []).extend((src, r) for r in _unpack(pl.words, width))
    return res


def _pack(keys, width, per=None):
    """Group fixed-width keys into payload-sized word tuples."""
    per = min(per or MAX_WORDS, max(1, MAX_WORDS // width))
    return [sum(keys[i:i + per], ()) for i in range(0, len(keys), per)]


def _unpack(words, width):
    return [tuple(words[i:i + width]) for i in range(0, len(words), width)]


def core_sort(engine: Engine, setup: Setup, keys: dict[int, list[tuple]]) -> SortResult:
    """Splitter sort on the core; keys are (value, origin, ordinal) word triples.

    (origin, ordinal) must be unique among the keys a node supplies.

    1. each node sorts locally and announces SORT_SAMPLES regular samples to all;
    2. every node counts its keys below each candidate; per-candidate totals are
       summed by the candidate's owner and announced, so all candidates carry
       their exact global rank;
    3. the keys between two consecutive candidates all go to one node, the
       owner of the block they fall in (for a gap across a block boundary, the
       block holding most of it), which ranks them from the known rank of the
       gap's lower end;
    4. keys ranked outside the receiver's block move to their block owner
       (value learning) and ranks go back to the nodes that supplied them
       (index learning).
    """
    order = setup.core_order
    p = len(order)
    start = engine.round
    local = {w: sorted(keys.get(w, ())) for w in order}
    if any(len(v) > SORT_LOAD_FACTOR * max(p, 1) for v in local.values()):
        raise LoadExceeded(f"a core node holds more than {SORT_LOAD_FACTOR}*n_C keys")
    total = sum(len(v) for v in local.values())
    if total == 0:
        return SortResult({w: [] for w in order}, {w: {} for w in order}, 0, 0, 0)
    width = KEY_WIDTH
    for w, v in local.items():
        for k in v:
            if len(k) != width:
                raise ValueError(f"sort keys must have {width} words")
        if len({k[1:] for k in v}) != len(v):
            raise ValueError(f"node {w}: keys must differ in their (origin, ordinal) words")
    B = math.ceil(total / p)

    # 1. samples to everybody
    items = {}
    for i, w in enumerate(order):
        samp = _staggered(local[w], SORT_SAMPLES, _offset(i, p))
        items[w] = [Payload("sample", ws) for ws in _pack(samp, width)]
    got, _ = core_broadcast(engine, items)
    cands = {w: sorted(k for _, pl in got.get(w, ()) for k in _unpack(pl.words, width))
             for w in order}
    cand = sorted(set(cands[order[0]]) | set(_staggered(local[order[0]], SORT_SAMPLES, _offset(0, p))))
    owner_of = [order[min(p - 1, j // SORT_SAMPLES)] for j in range(len(cand))]

    # 2. exact global rank of every candidate
    msgs = []
    for w in order:
        lw = local[w]
        counts = [bisect.bisect_right(lw, c) for c in cand]
        for j0 in range(0, len(cand), SORT_SAMPLES):
            chunk = counts[j0:j0 + SORT_SAMPLES]
            msgs.append((w, owner_of[j0], Payload("count", tuple(chunk))))
    got, _ = send_msgs(engine, msgs)
    sums = {}
    for w in order:
        acc = None
        for _, pl in got.get(w, ()):
            acc = list(pl.words) if acc is None else [a + b for a, b in zip(acc, pl.words)]
        if acc is not None:
            sums[w] = acc
    got, _ = core_broadcast(engine, {w: [Payload("rank", tuple(v))] for w, v in sums.items()})
    heard = {src: pl.words for src, pl in got.get(order[0], ())}
    heard.update({order[0]: tuple(sums.get(order[0], ()))})
    crank = []
    for j0 in range(0, len(cand), SORT_SAMPLES):
        crank.extend(heard[owner_of[j0]])

    # 3. every gap between consecutive candidates has a known rank range; all
    # its keys go to one node: the owner of its block, or, for a gap that
    # straddles a block boundary, the owner of the block holding most of it
    nc = len(cand)

    def gap_dest(j):
        lo = crank[j - 1] if j > 0 else 0
        hi = crank[j] if j < nc else total + 1
        if hi - lo <= 1:
            return None
        b0, b1 = lo // B, (hi - 2) // B
        if b0 == b1:
            return order[b0]
        share = [min(hi - 1, (b + 1) * B) - max(lo, b * B) for b in range(b0, b1 + 1)]
        return order[b0 + share.index(max(share))]

    dest = [gap_dest(j) for j in range(nc + 1)]
    out = {}
    for w in order:
        for key in local[w]:
            j = bisect.bisect_left(cand, key)
            if j < nc and cand[j] == key:
                d = order[(crank[j] - 1) // B]
            else:
                d = dest[j]
            out.setdefault((w, d), []).append(key)
    got, = packed_send(engine, ("key", width, out))

    # 4. receivers rank what they got; keys of other blocks move on (value
    # learning) and ranks go back to the nodes that supplied them (index learning)
    held = {w: [] for w in order}
    out = {}
    for w in order:
        bygap: dict = {}
        for src, key in got.get(w, ()):
            j = bisect.bisect_left(cand, key)
            if j < nc and cand[j] == key:
                bygap.setdefault(("c", j), []).append((key, src))
            else:
                bygap.setdefault(("g", j), []).append((key, src))
        for (kind, j), lst in bygap.items():
            lst.sort()
            base = crank[j] - 1 if kind == "c" else (crank[j - 1] if j > 0 else 0)
            for i, (key, src) in enumerate(lst):
                r = base + i + 1
                owner = order[(r - 1) // B]
                if owner == w:
                    held[w].append(key)
                else:
                    out.setdefault((w, owner), []).append(("vl",) + key)
                # the supplier knows its key from (origin, ordinal)
                out.setdefault((w, src), []).append(("il", key[1], key[2], r))
    vl = {pair: [x[1:] for x in xs if x[0] == "vl"] for pair, xs in out.items()}
    il = {pair: [x[1:] for x in xs if x[0] == "il"] for pair, xs in out.items()}
    got_vl, got_il = packed_send(engine, ("vl", width, vl), ("il", 3, il))
    ranks = {w: {} for w in order}
    for w in order:
        held[w].extend(k for _, k in got_vl.get(w, ()))
        mine = {k[1:]: k for k in local[w]}
        for _, (o, ordinal, r) in got_il.get(w, ()):
            ranks[w][mine[(o, ordinal)]] = r
    # a block's keys are exactly the ranks b*B+1.., so sorting restores them
    blocks = {w: sorted(held[w]) for w in order}
    rounds = engine.round - start
    if rounds > SORT_ROUND_CAP:
        raise SendMsgBoundExceeded(f"core_sort used {rounds} rounds > {SORT_ROUND_CAP}")
    return SortResult(blocks, ranks, B, total, rounds)
