"""Distributed BFS, item numbering, pipelined broadcast and k-broadcast.

All protocols accept several edge-disjoint "parts" at once: a node is given,
per part, the subset of its incident ports that belong to that part, and the
part of an incoming token is recovered from the port it arrived on. Running
one part over the whole graph is the single-tree baseline.
"""

from __future__ import annotations

import heapq
import math
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .graph import ID_EXPONENT, Graph, min_cut
from .sim import Ledger, NodeProgram, RunReport, SimResult, run

EXPLORE, CHILD, SUM, RANGE, DATA = 1, 2, 3, 4, 5


class BFSError(RuntimeError):
    """The BFS never reached some node (edge set not connected)."""


class BroadcastError(RuntimeError):
    pass


# ---------------------------------------------------------------- BFS


@dataclass
class BFSTree:
    root: int
    parent: list[int | None]
    depth: list[int]
    children: list[tuple[int, ...]]

    @property
    def height(self) -> int:
        return max(self.depth)


class BFSProgram(NodeProgram):
    """Layered BFS in every part simultaneously.

    input: list over parts of ``(ports, is_root)``. A node reached in round r
    adopts the minimum-ID sender of that round as parent, then in round r+1
    acknowledges its parent and explores the remaining part ports.
    """

    def __init__(self, view):
        super().__init__(view)
        parts = view.input
        self.k = len(parts)
        self.ports = [tuple(p) for p, _ in parts]
        self.part_of = {u: i for i, p in enumerate(self.ports) for u in p}
        self.parent = [None] * self.k
        self.depth = [None] * self.k
        self.children: list[list[int]] = [[] for _ in range(self.k)]
        self.heard: list[set[int]] = [set() for _ in range(self.k)]
        self.pending: list[int] = []
        for i, (_, is_root) in enumerate(parts):
            if is_root:
                self.depth[i] = 0
                self.pending.append(i)
        self.done = not self.pending

    def send(self, rnd):
        out = []
        for i in self.pending:
            par = self.parent[i]
            if par is not None:
                out.append((par, (CHILD,)))
            tok = (EXPLORE,)
            skip = self.heard[i]
            out.append((tuple(u for u in self.ports[i] if u not in skip), tok))
        self.pending = []
        self.done = True
        return out

    def receive(self, rnd, inbox):
        fresh: dict[int, list[int]] = {}
        for u, tok in inbox.items():
            i = self.part_of[u]
            if tok[0] == CHILD:
                self.children[i].append(u)
            elif self.depth[i] is None:
                fresh.setdefault(i, []).append(u)
            else:
                self.heard[i].add(u)
        ids = self.view.neighbor_ids
        for i, senders in fresh.items():
            self.parent[i] = min(senders, key=ids.__getitem__)
            self.depth[i] = rnd
            self.heard[i].update(senders)
            self.pending.append(i)
        if self.pending:
            self.done = False

    def output(self):
        return [
            (self.parent[i], self.depth[i], tuple(sorted(self.children[i], key=self.view.neighbor_ids.__getitem__)))
            for i in range(self.k)
        ]


def leader(g: Graph) -> int:
    """Minimum-ID node; the standing leader / root convention."""
    return min(range(g.n), key=g.node_ids.__getitem__)


def run_bfs_parts(g: Graph, parts: Sequence[Sequence[int]], roots: Sequence[int], seed: int = 0):
    """BFS inside each edge set of ``parts`` (edge ids of ``g``) at once."""
    ports: list[list[list[int]]] = [[[] for _ in parts] for _ in range(g.n)]
    for i, eids in enumerate(parts):
        for e in eids:
            u, v, _ = g.edges[e]
            ports[u][i].append(v)
            ports[v][i].append(u)
    inputs = [[(ports[v][i], roots[i] == v) for i in range(len(parts))] for v in range(g.n)]
    res = run(g, BFSProgram, seed=seed, inputs=inputs, round_cap=4 * g.n + 8)
    outs = res.outputs()
    trees = []
    for i in range(len(parts)):
        parent = [outs[v][i][0] for v in range(g.n)]
        depth = [outs[v][i][1] for v in range(g.n)]
        missing = [v for v in range(g.n) if depth[v] is None]
        if missing:
            raise BFSError(f"part {i}: BFS did not reach node {missing[0]}")
        trees.append(BFSTree(roots[i], parent, depth, [outs[v][i][2] for v in range(g.n)]))
    return trees, res


def bfs(g: Graph, root: int, seed: int = 0) -> tuple[BFSTree, int]:
    """Distributed BFS over all edges of ``g``; returns the tree and rounds."""
    trees, res = run_bfs_parts(g, [range(g.m)], [root], seed)
    return trees[0], res.rounds


# ---------------------------------------------------------------- numbering


class NumberingProgram(NodeProgram):
    """Subtree counts flow up the tree, identifier ranges flow down.

    input: ``(parent, children, count)``. Output: ``(first_id, total)``; the
    node's items get ids ``first_id .. first_id + count - 1``.
    """

    def __init__(self, view):
        super().__init__(view)
        self.parent, self.children, self.count = view.input
        self.sub: dict[int, int] = {}
        self.first = None
        self.total = None
        self.sent_up = False
        self.pending_down = False
        self.done = not self._has_work()

    def _counted(self):
        return len(self.sub) == len(self.children)

    def _has_work(self):
        if not self._counted():
            return False
        if self.parent is None:
            return self.first is None or self.pending_down
        return not self.sent_up or self.pending_down

    def send(self, rnd):
        out = []
        if self._counted():
            if self.parent is not None and not self.sent_up:
                out.append((self.parent, (SUM, self.count + sum(self.sub.values()))))
                self.sent_up = True
            elif self.parent is None and self.first is None:
                self.first = 1
                self.total = self.count + sum(self.sub.values())
                self.pending_down = bool(self.children)
        if self.pending_down:
            start = self.first + self.count
            for c in self.children:
                out.append((c, (RANGE, start, self.total)))
                start += self.sub[c]
            self.pending_down = False
        self.done = not self._has_work()
        return out

    def receive(self, rnd, inbox):
        for u, tok in inbox.items():
            if tok[0] == SUM:
                self.sub[u] = tok[1]
            elif tok[0] == RANGE:
                self.first, self.total = tok[1], tok[2]
                self.pending_down = bool(self.children)
        self.done = not self._has_work()

    def output(self):
        return self.first, self.total


@dataclass
class NumberedMessages:
    first: list[int]  # first id per node
    counts: list[int]
    total: int

    def ids_of(self, v: int) -> range:
        return range(self.first[v], self.first[v] + self.counts[v])


def _number(g: Graph, tree: BFSTree, counts: Sequence[int], seed: int) -> tuple[NumberedMessages, SimResult]:
    cap = max(g.n, 2) ** ID_EXPONENT
    for v, x in enumerate(counts):
        if x < 0 or x > cap:
            raise ValueError(f"node {v} holds {x} items; must lie in [0, n^{ID_EXPONENT}]")
    inputs = [(tree.parent[v], tree.children[v], counts[v]) for v in range(g.n)]
    res = run(g, NumberingProgram, seed=seed, inputs=inputs, round_cap=8 * g.n + 8)
    outs = res.outputs()
    first = [f for f, _ in outs]
    total = outs[tree.root][1]
    return NumberedMessages(first, list(counts), total), res


def assign_ids(g: Graph, counts: Sequence[int], seed: int = 0) -> tuple[NumberedMessages, int]:
    """BFS from the leader, then the two-sweep range subdivision."""
    tree, bfs_rounds = bfs(g, leader(g), seed)
    numbered, res = _number(g, tree, counts, seed)
    return numbered, bfs_rounds + res.rounds


# ---------------------------------------------------------------- broadcast


@dataclass
class BroadcastInstance:
    """``messages[j] = (holder, content)``; content is a tuple of ints."""

    messages: list[tuple[int, tuple[int, ...]]]

    @property
    def k(self) -> int:
        return len(self.messages)

    def counts(self, n: int) -> list[int]:
        c = [0] * n
        for h, _ in self.messages:
            c[h] += 1
        return c

    def by_holder(self, n: int) -> list[list[tuple[int, ...]]]:
        out: list[list[tuple[int, ...]]] = [[] for _ in range(n)]
        for h, content in self.messages:
            out[h].append(tuple(content))
        return out


PLACEMENTS = ("one-node", "uniform", "adversarial-cut")


def place_messages(
    g: Graph,
    k: int,
    placement: str = "one-node",
    seed: int = 0,
    holder: int | None = None,
    cut_side: Iterable[int] | None = None,
) -> BroadcastInstance:
    """``k`` messages ``(j,)`` placed on ``g``.

    ``one-node`` puts all of them on ``holder`` (default: the leader);
    ``uniform`` draws each holder uniformly; ``adversarial-cut`` spreads them
    over the side of a minimum cut that does not contain the leader, so every
    message must cross the cut. Pass ``cut_side`` to reuse a known minimum
    cut instead of recomputing it.
    """
    rng = random.Random(seed)
    if placement == "one-node":
        h = leader(g) if holder is None else holder
        return BroadcastInstance([(h, (j,)) for j in range(k)])
    if placement == "uniform":
        return BroadcastInstance([(rng.randrange(g.n), (j,)) for j in range(k)])
    if placement == "adversarial-cut":
        side = set(min_cut(g)[1] if cut_side is None else cut_side)
        far = sorted(side if leader(g) not in side else set(range(g.n)) - side)
        if not far:
            far = [leader(g)]
        return BroadcastInstance([(rng.choice(far), (j,)) for j in range(k)])
    raise ValueError(f"unknown placement {placement!r}; choose from {', '.join(PLACEMENTS)}")


class PipelineProgram(NodeProgram):
    """Convergecast to each part's root, then pipelined downcast.

    input: list over parts of ``(parent, children, own)`` with ``own`` a list
    of ``(index, content)``. Per part and round a node forwards its smallest
    queued index upward and the oldest queued message to all children.
    """

    _NONE, _DOWN, _UP = 0, 1, 2

    def __init__(self, view):
        super().__init__(view)
        parts = view.input
        self.k = len(parts)
        self.parent = [p for p, _, _ in parts]
        self.children = [tuple(c) for _, c, _ in parts]
        # what to do with a token arriving on each port: (part, action)
        self.port: dict[int, tuple[int, int]] = {}
        for i, (p, c, _) in enumerate(parts):
            if p is not None:
                self.port[p] = (i, self._DOWN if c else self._NONE)
            for u in c:
                self.port[u] = (i, self._DOWN if p is None else self._UP)
        self.up = [[] for _ in range(self.k)]
        self.down = [deque() for _ in range(self.k)]
        self.known: dict[int, tuple] = {}  # index -> full token
        self.busy = set()
        for i, (p, c, own) in enumerate(parts):
            for idx, content in own:
                tok = (DATA, idx, *content)
                self.known[idx] = tok
                if p is None:
                    if c:
                        self.down[i].append(tok)
                else:
                    heapq.heappush(self.up[i], tok)
            if self.up[i] or self.down[i]:
                self.busy.add(i)
        self.done = not self.busy

    def send(self, rnd):
        out = []
        idle = []
        for i in self.busy:
            up = self.up[i]
            if up:
                # tokens share the tag, so heap order is index order
                out.append((self.parent[i], heapq.heappop(up)))
            down = self.down[i]
            if down:
                out.append((self.children[i], down.popleft()))
            if not up and not down:
                idle.append(i)
        for i in idle:
            self.busy.discard(i)
        self.done = not self.busy
        return out

    def receive(self, rnd, inbox):
        known, port, busy = self.known, self.port, self.busy
        for u, tok in inbox.items():
            known[tok[1]] = tok
            i, action = port[u]
            if action == 1:
                self.down[i].append(tok)
                busy.add(i)
            elif action == 2:
                heapq.heappush(self.up[i], tok)
                busy.add(i)
        self.done = not busy

    def output(self):
        return {idx: tok[2:] for idx, tok in self.known.items()}


def check_delivery(received: Sequence[dict], inst: BroadcastInstance) -> bool:
    """Every node holds ids 1..k carrying exactly the instance's contents."""
    if not received:
        return True
    first = received[0]
    if set(first) != set(range(1, inst.k + 1)):
        return False
    if Counter(first.values()) != Counter(tuple(c) for _, c in inst.messages):
        return False
    return all(rec == first for rec in received)


@dataclass
class BroadcastResult:
    report: RunReport
    received: list[dict] = field(repr=False)


def basic_broadcast(g: Graph, inst: BroadcastInstance, root: int | None = None, seed: int = 0) -> BroadcastResult:
    """Single-tree O(D + k) broadcast: BFS from ``root`` then pipelining.

    Messages are labelled 1..k in instance order (labels are payload only;
    no numbering phase is run).
    """
    root = leader(g) if root is None else root
    led = Ledger(g)
    trees, res = run_bfs_parts(g, [range(g.m)], [root], seed)
    led.add("bfs", res)
    tree = trees[0]
    own: list[list] = [[] for _ in range(g.n)]
    for j, (h, content) in enumerate(inst.messages, start=1):
        own[h].append((j, tuple(content)))
    inputs = [[(tree.parent[v], tree.children[v], own[v])] for v in range(g.n)]
    res = led.add("broadcast", run(g, PipelineProgram, seed=seed, inputs=inputs, round_cap=4 * (inst.k + g.n) + 16))
    received = res.outputs()
    report = led.report(correctness=check_delivery(received, inst))
    report.extra["tree_depth"] = tree.height
    return BroadcastResult(report, received)


def theory_references(n: int, delta: int, lam: int | None, k: int) -> tuple[int | None, float | None]:
    """(ceil(k/lambda), n ln n / delta + k ln n / lambda) when lambda is known."""
    if not lam:
        return None, None
    ln = math.log(n)
    return -(-k // lam), n * ln / delta + k * ln / lam


def k_broadcast(
    g: Graph,
    inst: BroadcastInstance,
    packing,
    seed: int = 0,
    lam: int | None = None,
) -> BroadcastResult:
    """Broadcast over an edge-disjoint tree packing.

    The messages are numbered once over a BFS tree of ``g``; message ``j``
    then travels only inside part ``(j - 1) // ceil(k / parts)``, and all
    parts pipeline simultaneously.
    """
    led = Ledger(g)
    root = leader(g)
    trees, res = run_bfs_parts(g, [range(g.m)], [root], seed)
    led.add("bfs", res)
    numbered, res = _number(g, trees[0], inst.counts(g.n), seed)
    led.add("numbering", res)
    k = numbered.total
    lam_parts = len(packing.trees)
    block = max(1, -(-k // lam_parts))
    holders = inst.by_holder(g.n)
    inputs = []
    for v in range(g.n):
        own: list[list] = [[] for _ in range(lam_parts)]
        for idx, content in zip(numbered.ids_of(v), holders[v]):
            own[(idx - 1) // block].append((idx, content))
        inputs.append(
            [(t.parent[v], t.children[v], own[i]) for i, t in enumerate(packing.trees)]
        )
    cap = 4 * (block + g.n) + 16
    res = led.add("broadcast", run(g, PipelineProgram, seed=seed, inputs=inputs, round_cap=cap))
    received = res.outputs()
    lb, ub = theory_references(g.n, g.min_degree, lam, inst.k)
    report = led.report(
        correctness=check_delivery(received, inst),
        reference_lower_bound=lb,
        reference_upper_formula=ub,
    )
    report.extra.update(
        parts=lam_parts,
        messages_per_part=[min(block, max(0, k - i * block)) for i in range(lam_parts)],
        part_diameters=[t.subgraph_diameter for t in packing.trees],
    )
    return BroadcastResult(report, received)
