"""Rank, median, mode, distinct count and top-r by area over one value per node.

All five follow the same pattern: values travel to the representatives, the
core sorts them, a little information is exchanged among core nodes, and the
answers go back along the convergecast routes.  Sort keys are
(value, node id, extra word), so equal values are ordered by node id.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import Engine, Payload, RoundLimitExceeded
from .matrix import _Ctx
from .services import core_broadcast, core_sort, down_stream, down_wave, send_msgs, up_wave
from .topology import PartitionedNetwork

MODE_BUDGET = 4
# per-call round bounds: AGGREGATE_ROUND_CAP for rank, median, mode and
# distinct count, AGGREGATE_ROUND_CAP*(r+1) for top-r
AGGREGATE_ROUND_CAP = 40
ABSENT = 0   # padding for short top-r answers; area ranges start at 1


class ModeSetTooLarge(RuntimeError):
    pass


class ValueFormatError(ValueError):
    pass


@dataclass
class AggregateRun:
    result: dict          # node -> answer
    rounds: int
    setup_rounds: int
    engine: Engine

    @property
    def total_rounds(self) -> int:
        return self.rounds + self.setup_rounds


@dataclass(frozen=True)
class ModeAnswer:
    frequency: int
    # the modal values; empty when frequency is 1, which means every value is modal
    values: tuple


def _check_values(net, values):
    if sorted(values) != list(range(net.n)):
        raise ValueFormatError("need exactly one value per node")
    for v, x in values.items():
        if not isinstance(x, (int, np.integer)) or not 0 <= x < 1 << 64:
            raise ValueFormatError(f"node {v}: value {x!r} is not a 64-bit unsigned integer")


def _collect_and_sort(ctx, values, extra=None):
    """Steps 1 and 2: values to the representatives, then sort on the core.

    Returns the SortResult and {node: key}.
    """
    eng, net = ctx.eng, ctx.net
    extra = extra or {}
    key = {v: (int(values[v]), v, int(extra.get(v, 0))) for v in range(net.n)}
    with eng.tag("collect"):
        got = up_wave(eng, ctx.setup.reps, {v: Payload("val", (key[v][0], key[v][2]))
                                            for v in net.periphery})
    at_rep = {w: [] for w in net.core}
    for w, lst in got.items():
        for origin, pl in lst:
            at_rep[w].append((pl.words[0], origin, pl.words[1]))
    for w in net.core:
        at_rep[w].append(key[w])
    with eng.tag("sort"):
        res = core_sort(eng, ctx.setup, at_rep)
    return res, key


def _deliver(ctx, answer_of_core, payload_of):
    """Each representative hands the common answer to the nodes it represents."""
    net = ctx.net
    with ctx.eng.tag("deliver"):
        down_wave(ctx.eng, ctx.setup.reps,
                  {p: payload_of(answer_of_core[ctx.rep[p]]) for p in net.periphery})
    return {v: answer_of_core[ctx.rep[v]] for v in range(net.n)}


def _done(ctx, result, bound: int = AGGREGATE_ROUND_CAP) -> AggregateRun:
    eng = ctx.eng
    rounds = eng.round - ctx.start
    if rounds > bound and not ctx.force:
        raise RoundLimitExceeded(bound, f"{rounds} rounds exceed the bound {bound}")
    return AggregateRun(result, rounds, ctx.start, eng)


def _block_runs(block):
    """Run-length encode the values of a sorted block: [(value, count), ...]."""
    runs = []
    for k in block:
        if runs and runs[-1][0] == k[0]:
            runs[-1][1] += 1
        else:
            runs.append([k[0], 1])
    return [tuple(r) for r in runs]


def rank(net: PartitionedNetwork, values: dict, seed: int = 0, force: bool = False,
         gamma: int = 2, alpha: int = 2, beta: int = 2,
         round_limit: int | None = None) -> AggregateRun:
    """Every node learns the global rank (1-based) of its value."""
    _check_values(net, values)
    ctx = _Ctx(net, seed, force, gamma, alpha, beta, round_limit)
    res, key = _collect_and_sort(ctx, values)
    out = {v: res.ranks[ctx.rep[v]][key[v]] for v in range(net.n)}
    with ctx.eng.tag("deliver"):
        down_wave(ctx.eng, ctx.setup.reps, {p: Payload("rank", (out[p],)) for p in net.periphery})
    return _done(ctx, out)


def median(net: PartitionedNetwork, values: dict, seed: int = 0, force: bool = False,
           gamma: int = 2, alpha: int = 2, beta: int = 2,
           round_limit: int | None = None) -> AggregateRun:
    """Every node learns the value of global rank ceil(n/2)."""
    _check_values(net, values)
    ctx = _Ctx(net, seed, force, gamma, alpha, beta, round_limit)
    res, _ = _collect_and_sort(ctx, values)
    m = (net.n + 1) // 2
    order = ctx.order
    holder = order[(m - 1) // res.block_size]
    val = res.blocks[holder][(m - 1) % res.block_size][0]
    with ctx.eng.tag("announce"):
        got, _ = core_broadcast(ctx.eng, {holder: [Payload("median", (val,))]})
    ans = {holder: val}
    for w, lst in got.items():
        ans[w] = lst[0][1].words[0]
    return _done(ctx, _deliver(ctx, ans, lambda x: Payload("median", (x,))))


def mode(net: PartitionedNetwork, values: dict, seed: int = 0, force: bool = False,
         gamma: int = 2, alpha: int = 2, beta: int = 2,
         round_limit: int | None = None, budget: int = MODE_BUDGET) -> AggregateRun:
    """Every node learns the most frequent value(s) and their frequency.

    Each core node announces its interior top run(s) and its two border runs.
    Border runs of consecutive blocks are chained, so a run spread over any
    number of blocks is counted in full.
    """
    if not 1 <= budget <= 4:
        raise ValueError("mode budget must be between 1 and 4")
    _check_values(net, values)
    ctx = _Ctx(net, seed, force, gamma, alpha, beta, round_limit)
    res, _ = _collect_and_sort(ctx, values)
    order = ctx.order
    items = {}
    reports = {}
    for w in order:
        runs = _block_runs(res.blocks[w])
        if not runs:
            rep = (0, 0, (), None, None)
        else:
            inner = runs[1:-1]
            f = max((c for _, c in inner), default=0)
            top = tuple(x for x, c in inner if c == f) if f else ()
            rep = (f, len(top), top[:budget], runs[0], runs[-1])
        reports[w] = rep
        f, cnt, top, lo, hi = rep
        pls = [Payload("top", (f, cnt) + top)]
        if lo is not None:
            pls.append(Payload("ends", lo + hi))
        items[w] = pls
    with ctx.eng.tag("announce"):
        core_broadcast(ctx.eng, items)
    # every core node now holds all reports; they run the same computation
    ans = _merge_mode(order, reports, budget)
    out = {w: ans for w in order}
    return _done(ctx, _deliver(ctx, out, lambda a: Payload("mode", (a.frequency,) + a.values)))


def _merge_mode(order, reports, budget):
    runs = []
    cur = None
    for w in order:
        f, cnt, top, lo, hi = reports[w]
        if lo is None:
            continue
        uniform = lo[0] == hi[0]
        if cur is not None and cur[0] == lo[0]:
            cur[1] += lo[1]
        else:
            if cur is not None:
                runs.append(tuple(cur))
            cur = [lo[0], lo[1]]
        if not uniform:
            runs.append(tuple(cur))
            cur = [hi[0], hi[1]]
    if cur is not None:
        runs.append(tuple(cur))
    best = max([c for _, c in runs] + [reports[w][0] for w in order])
    if best <= 1:
        return ModeAnswer(1, ())
    modal = {x for x, c in runs if c == best}
    overflow = False
    for w in order:
        f, cnt, top, _, _ = reports[w]
        if f == best:
            modal.update(top)
            overflow |= cnt > len(top)
    if overflow or len(modal) > budget:
        raise ModeSetTooLarge(f"more than {budget} values occur {best} times")
    return ModeAnswer(best, tuple(sorted(modal)))


def distinct_count(net: PartitionedNetwork, values: dict, seed: int = 0, force: bool = False,
                   gamma: int = 2, alpha: int = 2, beta: int = 2,
                   round_limit: int | None = None) -> AggregateRun:
    """Every node learns the number of distinct values.

    Each core node announces how many distinct values its block has and the
    block's two border values; a border value shared by consecutive blocks is
    counted once.
    """
    _check_values(net, values)
    ctx = _Ctx(net, seed, force, gamma, alpha, beta, round_limit)
    res, _ = _collect_and_sort(ctx, values)
    order = ctx.order
    reports = {}
    for w in order:
        runs = _block_runs(res.blocks[w])
        reports[w] = (len(runs), runs[0][0], runs[-1][0]) if runs else (0, 0, 0)
    with ctx.eng.tag("announce"):
        core_broadcast(ctx.eng, {w: [Payload("distinct", r)] for w, r in reports.items()})
    total = 0
    prev = None
    for w in order:
        d, lo, hi = reports[w]
        if d == 0:
            continue
        total += d
        if prev is not None and prev == lo:
            total -= 1
        prev = hi
    return _done(ctx, _deliver(ctx, {w: total for w in order}, lambda x: Payload("distinct", (x,))))


def check_areas(net: PartitionedNetwork, values: dict, areas: dict, interests: dict) -> int:
    """Validate a top-r instance; returns the number of areas."""
    _check_values(net, values)
    na = math.isqrt(net.n - 1) + 1 if net.n > 1 else 1
    for d, what in ((areas, "area"), (interests, "interest")):
        if sorted(d) != list(range(net.n)):
            raise ValueFormatError(f"need exactly one {what} per node")
        for v, a in d.items():
            if not 1 <= a <= na:
                raise ValueFormatError(f"node {v}: {what} {a} outside 1..{na}")
    span: dict = {}
    for v, x in values.items():
        if x == ABSENT:
            raise ValueFormatError(f"node {v}: value {ABSENT} is reserved")
        lo, hi = span.get(areas[v], (x, x))
        span[areas[v]] = (min(lo, x), max(hi, x))
    last = None
    for a in sorted(span):
        if last is not None and span[a][0] <= last:
            raise ValueFormatError(f"area {a} overlaps the range of a smaller area")
        last = span[a][1]
    return na


def topk_by_area(net: PartitionedNetwork, values: dict, areas: dict, interests: dict, r: int,
                 seed: int = 0, force: bool = False, gamma: int = 2, alpha: int = 2, beta: int = 2,
                 round_limit: int | None = None) -> AggregateRun:
    """Every node receives the r largest values of the area it is interested in.

    Answers are tuples of length r in decreasing order, padded with ABSENT.
    Core node number a (in the renaming) is responsible for area a.
    """
    if r < 1:
        raise ValueError("r must be positive")
    na = check_areas(net, values, areas, interests)
    if na > net.n_C:
        raise ValueError(f"{na} areas but only {net.n_C} core nodes")
    ctx = _Ctx(net, seed, force, gamma, alpha, beta, round_limit)
    eng, order = ctx.eng, ctx.order
    res, _ = _collect_and_sort(ctx, values, extra=areas)

    # step 3: largest r values of each area present in a block go to the area's node
    msgs = []
    for w in order:
        per: dict = {}
        for x, _, a in res.blocks[w]:
            per.setdefault(a, []).append(x)
        for a, xs in per.items():
            for x in xs[-r:]:
                msgs.append((w, order[a - 1], Payload("top", (a, x))))
    with eng.tag("topk:3"):
        got, _ = send_msgs(eng, msgs)
    best = {}
    for w, lst in got.items():
        xs = sorted((pl.words[1] for _, pl in lst), reverse=True)
        best[w] = xs[:r]

    # step 4: representatives ask for the areas their nodes want
    wanted: dict = {}
    for v in range(net.n):
        wanted.setdefault(ctx.rep[v], set()).add(interests[v])
    with eng.tag("topk:4"):
        asks = [(w, order[a - 1], Payload("ask", (a,))) for w in sorted(wanted)
                for a in sorted(wanted[w])]
        got, _ = send_msgs(eng, asks)
        replies = []
        for o, lst in got.items():
            for w, _ in lst:
                a = ctx.setup.core_index(o) + 1
                replies.extend((o, w, Payload("val", (a, x))) for x in best.get(o, ()))
        got, _ = send_msgs(eng, replies)
    at_rep: dict = {}
    for w, lst in got.items():
        for _, pl in lst:
            at_rep.setdefault((w, pl.words[0]), []).append(pl.words[1])

    # step 5: representatives hand the values to their nodes
    out = {}
    down = {}
    for v in range(net.n):
        xs = sorted(at_rep.get((ctx.rep[v], interests[v]), ()), reverse=True)
        out[v] = tuple(xs) + (ABSENT,) * (r - len(xs))
        if not net.in_core[v]:
            down[v] = [Payload("val", (x,)) for x in xs]
    with eng.tag("topk:5"):
        down_stream(eng, ctx.setup.reps, down)
    return _done(ctx, out, AGGREGATE_ROUND_CAP * (r + 1))


# -- inputs ---------------------------------------------------------------------

def random_values(n: int, seed: int = 0, hi: int | None = None) -> dict:
    """Uniform values in [0, hi); hi defaults to n, so repeats are common."""
    rng = np.random.default_rng([seed, 7])
    hi = n if hi is None else hi
    xs = rng.integers(0, hi, size=n)
    return {v: int(x) for v, x in enumerate(xs)}


def random_area_instance(n: int, seed: int = 0):
    """Areas 1..ceil(sqrt n); area a owns the value range [(a-1)n+1, a*n].

    Returns (values, areas, interests).
    """
    rng = np.random.default_rng([seed, 8])
    na = math.isqrt(n - 1) + 1
    areas = rng.integers(1, na + 1, size=n)
    offs = rng.integers(1, n + 1, size=n)
    interests = rng.integers(1, na + 1, size=n)
    values = {v: int((areas[v] - 1) * n + offs[v]) for v in range(n)}
    return values, {v: int(a) for v, a in enumerate(areas)}, {v: int(a) for v, a in enumerate(interests)}


def values_to_text(values: dict, areas: dict | None = None, interests: dict | None = None) -> str:
    lines = []
    for v in sorted(values):
        if areas is None:
            lines.append(f"{v} {values[v]}")
        else:
            lines.append(f"{v} {values[v]} {areas[v]} {interests[v]}")
    return "\n".join(lines) + "\n"


def values_from_text(text: str):
    """Parse `node value [area interest]` lines; returns (values, areas, interests).

    areas and interests are None when the file has two columns.
    """
    values, areas, interests = {}, {}, {}
    width = None
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 4) or (width is not None and len(parts) != width):
            raise ValueFormatError(f"line {ln}: expected `node value [area interest]`")
        width = len(parts)
        try:
            nums = [int(p) for p in parts]
        except ValueError:
            raise ValueFormatError(f"line {ln}: non-integer field") from None
        v = nums[0]
        if v in values:
            raise ValueFormatError(f"line {ln}: node {v} listed twice")
        values[v] = nums[1]
        if width == 4:
            areas[v], interests[v] = nums[2], nums[3]
    if width == 4:
        return values, areas, interests
    return values, None, None
