"""Synchronous CONGEST round executor.

Every round, each directed edge may carry at most one envelope, and every
payload is a short record of integer words.  The engine checks both rules on
each delivery and keeps a per-round trace for complexity assertions.
"""
from __future__ import annotations

import csv
import io
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, NamedTuple, Protocol

import numpy as np

MAX_WORDS = 6


class CongestError(Exception):
    """Base class for violations of the round model."""


class CapacityViolation(CongestError):
    pass


class PayloadOverflow(CongestError):
    pass


class NonAdjacentSend(CongestError):
    pass


class RoundLimitExceeded(CongestError):
    def __init__(self, limit: int, message: str = ""):
        super().__init__(message or f"round limit {limit} exceeded")
        self.limit = limit


class Payload(NamedTuple):
    kind: str
    words: tuple = ()


class Envelope(NamedTuple):
    src: int
    dst: int
    payload: Payload
    # Routing header for relayed traffic: final destination and original
    # sender, one address word each, not part of the payload record.
    final: int = -1
    origin: int = -1


@dataclass
class RoundTrace:
    round: int
    sent: int
    max_edge_load: int
    phase_tag: str = ""
    per_edge_load: dict = field(default_factory=dict)


def node_rng(seed: int, node) -> np.random.Generator:
    """Node-local random stream derived from (seed, node).

    `node` may be an integer NodeId or a short string naming a service stream.
    """
    if isinstance(node, str):
        key = [int(seed), 1 << 40] + [ord(c) for c in node]
    else:
        key = [int(seed), int(node)]
    return np.random.default_rng(np.random.SeedSequence(key))


class Engine:
    """Round counter, CONGEST checker and trace recorder for one run.

    Protocols call `deliver` once per round with the envelopes sent in that
    round; the returned mapping is what each node finds in its inbox at the
    start of the next round.
    """

    def __init__(self, net, seed: int = 0, word_bits: int = 64,
                 round_limit: int | None = None, record_loads: bool = False):
        self.net = net
        self.seed = int(seed)
        self.word_bound = 1 << word_bits
        self.round_limit = round_limit
        self.record_loads = record_loads
        self.round = 0
        self.traces: list[RoundTrace] = []
        self._tag = ""
        self._windows: list[Counter] = []
        self._rngs: dict = {}
        self._nbrs = [set(a) for a in net.adj]

    # -- randomness ---------------------------------------------------------
    def rng(self, node) -> np.random.Generator:
        g = self._rngs.get(node)
        if g is None:
            g = self._rngs[node] = node_rng(self.seed, node)
        return g

    # -- tagging and load windows ---------------------------------------------
    @contextmanager
    def tag(self, label: str):
        old = self._tag
        self._tag = label
        try:
            yield
        finally:
            self._tag = old

    @contextmanager
    def load_window(self):
        """Accumulate per-directed-edge message counts while the block runs."""
        c: Counter = Counter()
        self._windows.append(c)
        try:
            yield c
        finally:
            self._windows.remove(c)

    # -- delivery -------------------------------------------------------------
    def check_payload(self, p: Payload) -> None:
        w = p.words
        if len(w) > MAX_WORDS:
            raise PayloadOverflow(f"{p.kind}: {len(w)} words > {MAX_WORDS}")
        bound = self.word_bound
        for x in w:
            if x < 0 or x >= bound:
                raise PayloadOverflow(f"{p.kind}: word {x} outside [0, 2^{bound.bit_length() - 1})")

    def deliver(self, envelopes: Iterable[Envelope]) -> dict[int, list[Envelope]]:
        """Execute one round; return the inboxes for the next round."""
        envelopes = list(envelopes)
        nbrs = self._nbrs
        used: dict = {}
        inbox: dict[int, list[Envelope]] = {}
        for e in envelopes:
            s, d = e.src, e.dst
            if d not in nbrs[s]:
                raise NonAdjacentSend(f"{s} -> {d} is not an edge")
            key = (s, d)
            if key in used:
                raise CapacityViolation(f"two envelopes on {s}->{d} in round {self.round + 1}")
            used[key] = 1
            self.check_payload(e.payload)
            box = inbox.get(d)
            if box is None:
                inbox[d] = [e]
            else:
                box.append(e)
        self._advance(len(envelopes), used)
        return inbox

    def _advance(self, sent: int, used: dict) -> None:
        if self.round_limit is not None and self.round >= self.round_limit:
            raise RoundLimitExceeded(self.round_limit)
        self.round += 1
        for w in self._windows:
            w.update(used.keys())
        self.traces.append(RoundTrace(
            round=self.round, sent=sent, max_edge_load=1 if sent else 0,
            phase_tag=self._tag,
            per_edge_load=dict(used) if self.record_loads else {},
        ))

    # -- export ---------------------------------------------------------------
    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "sent", "max_edge_load", "phase_tag"])
        for t in self.traces:
            w.writerow([t.round, t.sent, t.max_edge_load, t.phase_tag])
        return buf.getvalue()

    @property
    def messages(self) -> int:
        return sum(t.sent for t in self.traces)


# -- generic node-behaviour execution ----------------------------------------

class NodeBehavior(Protocol):
    def step(self, state, inbox: list[Envelope], round: int, ctx: "NodeContext"):
        """Return (new_state, outbox, halted)."""


@dataclass(frozen=True)
class NodeContext:
    node: int
    neighbors: tuple
    rng: np.random.Generator


def run_round(engine: Engine, behaviors: Mapping[int, NodeBehavior], states: dict,
              inboxes: Mapping[int, list[Envelope]]):
    """Run one synchronous round over all nodes in ascending id order.

    Returns (states', next_inboxes, trace, halted_nodes).
    """
    net = engine.net
    new_states = dict(states)
    out: list[Envelope] = []
    halted = set()
    r = engine.round + 1
    for v in range(net.n):
        b = behaviors.get(v)
        if b is None:
            continue
        ctx = NodeContext(v, tuple(net.adj[v]), engine.rng(v))
        st, outbox, done = b.step(states.get(v), list(inboxes.get(v, ())), r, ctx)
        new_states[v] = st
        for e in outbox:
            if e.src != v:
                raise NonAdjacentSend(f"node {v} tried to send as {e.src}")
        out.extend(outbox)
        if done:
            halted.add(v)
    nxt = engine.deliver(out)
    return new_states, nxt, engine.traces[-1], halted


def run_until(engine: Engine, behaviors: Mapping[int, NodeBehavior], states: dict,
              stop: Callable[[dict, int], bool] | None = None, round_limit: int = 1000):
    """Repeat rounds until `stop(states, round)` holds or every node halted."""
    if round_limit <= 0:
        raise ValueError("round_limit must be positive")
    inboxes: dict = {}
    halted: set = set()
    start = engine.round
    log = []
    while True:
        if stop is not None and stop(states, engine.round - start):
            break
        if halted >= set(behaviors) and not any(inboxes.values()):
            break
        if engine.round - start >= round_limit:
            raise RoundLimitExceeded(round_limit)
        states, inboxes, tr, h = run_round(engine, behaviors, states, inboxes)
        halted |= h
        log.append(tr)
    return states, log
