"""Round-synchronous CONGEST execution engine.

A protocol is a node-program factory: ``factory(view) -> program``. The
engine hands every program a :class:`LocalView` holding only node-local
knowledge, then loops

    1. ``program.send(rnd)`` for every awake node, returning an iterable of
       ``(dest, token)`` pairs (or ``None``), where ``dest`` is a neighbor or a
       tuple of neighbors that all get the same token;
    2. delivery, enforcing one token per directed edge and the bit budget;
    3. ``program.receive(rnd, inbox)`` with ``inbox`` a ``{sender: token}`` dict.

A program is awake while ``program.done`` is false; receiving a token wakes
it for that round's ``receive`` call, which may clear ``done`` again. The run
stops when every node is done (global termination is observed by the engine,
not detected distributively) or when ``round_cap`` is reached.

Tokens are tuples of non-negative ints; the first entry is a protocol tag.
"""

from __future__ import annotations

import csv
import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .graph import Graph

BANDWIDTH_CONST = 8


class BandwidthError(RuntimeError):
    """A program tried to exceed the per-edge, per-round CONGEST budget."""


class LocalityError(RuntimeError):
    """A program addressed a node that is not one of its neighbors."""


def bandwidth_bits(n: int, const: int = BANDWIDTH_CONST) -> int:
    return const * max(1, math.ceil(math.log2(n))) if n > 1 else const


def token_bits(tok: tuple) -> int:
    # zero-valued fields still occupy one bit
    return sum(map(int.bit_length, tok)) + tok.count(0)


def derive_seed(*parts: int) -> int:
    """Deterministic 64-bit seed from integer parts (splitmix64 chain)."""
    h = 0x9E3779B97F4A7C15
    for p in parts:
        h = _splitmix(h ^ (int(p) & 0xFFFFFFFFFFFFFFFF))
    return h


def _splitmix(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


@dataclass(frozen=True)
class LocalView:
    """Everything a node program may know at start-up."""

    node: int  # handle used to address this node
    id: int  # its identifier
    n: int
    neighbors: tuple[int, ...]
    neighbor_ids: dict[int, int]
    weights: dict[int, int]
    bandwidth: int
    rng: random.Random
    input: Any = None


class NodeProgram:
    """Base class for node programs; subclasses override send/receive.

    A program with ``done`` set sleeps until a message arrives. Setting
    ``wake_at`` as well also wakes it at that round; sleeping rounds still count.
    """

    done = True
    wake_at: int | None = None

    def __init__(self, view: LocalView):
        self.view = view

    def send(self, rnd: int):
        return None

    def receive(self, rnd: int, inbox: dict[int, tuple]) -> None:
        pass

    def output(self):
        return None


@dataclass
class SimResult:
    rounds: int
    congestion: np.ndarray  # tokens per undirected edge, both directions
    programs: list
    timed_out: bool = False
    trace: list | None = None

    @property
    def max_congestion(self) -> int:
        return int(self.congestion.max()) if len(self.congestion) else 0

    def outputs(self) -> list:
        return [p.output() for p in self.programs]


@dataclass
class RunReport:
    rounds_used: int
    max_edge_congestion: int
    correctness: bool | None = None
    reference_lower_bound: int | None = None
    reference_upper_formula: float | None = None
    timed_out: bool = False
    stages: dict[str, int] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "rounds_used": self.rounds_used,
            "max_edge_congestion": self.max_edge_congestion,
            "correctness": self.correctness,
            "reference_lower_bound": self.reference_lower_bound,
            "reference_upper_formula": self.reference_upper_formula,
            "timed_out": self.timed_out,
            "stages": dict(self.stages),
            **self.extra,
        }


class Ledger:
    """Accumulates rounds and per-edge congestion over sequential runs."""

    def __init__(self, g: Graph):
        self.congestion = np.zeros(g.m, dtype=np.int64)
        self.stages: dict[str, int] = {}
        self.timed_out = False

    def add(self, stage: str, res: SimResult) -> SimResult:
        self.congestion += res.congestion
        self.stages[stage] = self.stages.get(stage, 0) + res.rounds
        self.timed_out |= res.timed_out
        return res

    @property
    def rounds(self) -> int:
        return sum(self.stages.values())

    def report(self, **kw) -> RunReport:
        return RunReport(
            rounds_used=self.rounds,
            max_edge_congestion=int(self.congestion.max()) if len(self.congestion) else 0,
            timed_out=self.timed_out,
            stages=dict(self.stages),
            **kw,
        )


def run(
    g: Graph,
    protocol: Callable[[LocalView], NodeProgram],
    seed: int = 0,
    round_cap: int = 1_000_000,
    inputs: Sequence[Any] | None = None,
    bandwidth_const: int = BANDWIDTH_CONST,
    trace: bool = False,
) -> SimResult:
    """Execute ``protocol`` on ``g`` until global quiescence or ``round_cap``."""
    if round_cap < 1:
        raise ValueError("round_cap must be >= 1")
    n = g.n
    budget = bandwidth_bits(n, bandwidth_const)
    ids = g.node_ids
    progs: list[NodeProgram] = []
    # directed edge (v -> u) gets slot 2*eid + (v > u)
    slot_of: list[dict[int, int]] = []
    for v in range(n):
        nbrs = tuple(u for u, _ in g.adj[v])
        slot_of.append({u: 2 * eid + (v > u) for u, eid in g.adj[v]})
        view = LocalView(
            node=v,
            id=ids[v],
            n=n,
            neighbors=nbrs,
            neighbor_ids={u: ids[u] for u in nbrs},
            weights={u: g.edges[eid][2] for u, eid in g.adj[v]},
            bandwidth=budget,
            rng=random.Random(derive_seed(seed, ids[v])),
            input=None if inputs is None else inputs[v],
        )
        progs.append(protocol(view))

    load = [0] * (2 * g.m)
    stamp = [0] * (2 * g.m)
    log: list | None = [] if trace else None
    sizes: dict[tuple, int] = {}  # token -> bits, tokens recur across nodes and rounds
    timers: list[tuple[int, int]] = []
    for v, p in enumerate(progs):
        if p.done and p.wake_at is not None and p.wake_at > 0:
            heapq.heappush(timers, (p.wake_at, v))

    awake = [v for v in range(n) if not progs[v].done]
    rnd = 0
    timed_out = False
    while awake or timers:
        if not awake:
            # nothing to do until the next timer; the idle rounds still elapse
            rnd = min(max(rnd, timers[0][0] - 1), round_cap)
        if rnd >= round_cap:
            timed_out = True
            break
        rnd += 1
        if timers and timers[0][0] <= rnd:
            due = set(awake)
            while timers and timers[0][0] <= rnd:
                due.add(heapq.heappop(timers)[1])
            awake = sorted(due)
        boxes: list[dict[int, tuple] | None] = [None] * n
        touched: list[int] = []
        for v in awake:
            out = progs[v].send(rnd)
            if not out:
                continue
            slots = slot_of[v]
            for dst, tok in out:
                bits = sizes.get(tok)
                if bits is None:
                    bits = sizes[tok] = token_bits(tok)
                if bits > budget:
                    raise BandwidthError(
                        f"round {rnd}: node {v} token {tok!r} needs {bits} bits > budget {budget}"
                    )
                dsts = dst if type(dst) is tuple else (dst,)
                for u in dsts:
                    try:
                        s = slots[u]
                    except KeyError:
                        raise LocalityError(f"node {v} addressed non-neighbor {u}") from None
                    if stamp[s] == rnd:
                        raise BandwidthError(f"round {rnd}: two tokens on edge {v}->{u}")
                    stamp[s] = rnd
                    load[s] += 1
                    box = boxes[u]
                    if box is None:
                        boxes[u] = {v: tok}
                        touched.append(u)
                    else:
                        box[v] = tok
                if log is not None:
                    log.extend((rnd, ids[v], ids[u], bits) for u in dsts)
        for u in touched:
            progs[u].receive(rnd, boxes[u])
        woken = set(awake)
        woken.update(touched)
        awake = []
        for v in sorted(woken):
            p = progs[v]
            if not p.done:
                awake.append(v)
            elif p.wake_at is not None and p.wake_at > rnd:
                heapq.heappush(timers, (p.wake_at, v))

    loads = np.asarray(load, dtype=np.int64).reshape(-1, 2).sum(axis=1) if g.m else np.zeros(0, dtype=np.int64)
    return SimResult(rnd, loads, progs, timed_out, log)


def write_trace(result: SimResult, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["round", "src", "dst", "bits"])
        w.writerows(result.trace or [])
