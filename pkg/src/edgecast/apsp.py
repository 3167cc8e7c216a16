"""(3, 2)-approximate unweighted APSP through a sampled cluster graph.

Pipeline: sample centers, let each node join a neighboring center, run
all-pairs BFS on the cluster graph with delayed starts so that BFS waves never
collide, hand each center's row to its members, broadcast every node's center
over the tree packing, and finally estimate ``d'(u, v) = 3 d_c(s(u), s(v)) + 2``
locally.

Every virtual cluster-graph round is three real rounds:
center -> its members -> their neighbors in other clusters -> those clusters'
centers. A center therefore only ever sends at real rounds ``3t + base + 1``.
Each cluster crosses into each adjacent cluster through one port node, which
its center picks after learning who touches which foreign cluster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .broadcast import BroadcastInstance, k_broadcast, leader
from .graph import Graph
from .packing import DEFAULT_BOUND_CONST, DEFAULT_C, TreePacking, build_trees, exponential_search
from .sim import Ledger, NodeProgram, RunReport, derive_seed, run

ANNOUNCE, S_ID, FOREIGN, START, DFS, BFS, ROW, PORT = 11, 12, 13, 14, 15, 16, 17, 18
FWD, BACK = 0, 1
MAX_RESEEDS = 5


class CoverageError(RuntimeError):
    """Some node has no sampled center among its neighbors."""

    def __init__(self, node: int):
        super().__init__(f"node {node} has no center in its neighborhood")
        self.node = node


class CollisionError(RuntimeError):
    """Two distinct BFS waves had to cross one relay in the same round."""


@dataclass
class ClusterAssignment:
    centers: tuple[int, ...]
    s: list[int]  # center handle per node
    p: float

    def clusters(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {c: [] for c in self.centers}
        for v, c in enumerate(self.s):
            out[c].append(v)
        return out

    def cluster_graph(self, g: Graph) -> tuple[list[int], Graph]:
        """Explicit cluster graph: node i stands for center ``centers[i]``."""
        pos = {c: i for i, c in enumerate(self.centers)}
        edges = set()
        for u, v, _ in g.edges:
            a, b = pos[self.s[u]], pos[self.s[v]]
            if a != b:
                edges.add((min(a, b), max(a, b)))
        return list(self.centers), Graph(len(self.centers), sorted(edges))


class _SampleProgram(NodeProgram):
    def __init__(self, view):
        super().__init__(view)
        self.center = view.rng.random() < view.input
        self.choice = view.node if self.center else None
        self.done = not self.center

    def send(self, rnd):
        self.done = True
        tok = (ANNOUNCE,)
        return [(self.view.neighbors, tok)]

    def receive(self, rnd, inbox):
        if not self.center:
            ids = self.view.neighbor_ids
            self.choice = min(inbox, key=ids.__getitem__)

    def output(self):
        return self.center, self.choice


def center_probability(g: Graph, c: float) -> float:
    return min(1.0, c * math.log(g.n) / g.min_degree)


def sample_clusters(g: Graph, c: float = 3.0, seed: int = 0) -> tuple[ClusterAssignment, int]:
    """Self-sample centers, then every other node picks its minimum-ID
    sampled neighbor. Raises :class:`CoverageError` on an uncovered node."""
    if c <= 0 or g.min_degree < 1:
        raise ValueError("clustering needs c > 0 and min degree >= 1")
    p = center_probability(g, c)
    res = run(g, _SampleProgram, seed=seed, inputs=[p] * g.n)
    outs = res.outputs()
    for v, (_, choice) in enumerate(outs):
        if choice is None:
            raise CoverageError(v)
    centers = tuple(v for v, (is_c, _) in enumerate(outs) if is_c)
    return ClusterAssignment(centers, [ch for _, ch in outs], p), res.rounds


# ---------------------------------------------------------------- cluster graph discovery


class _GatherProgram(NodeProgram):
    """Learn neighbors' centers, then stream foreign center ids to own center."""

    def __init__(self, view):
        super().__init__(view)
        self.my_center, self.center_handle = view.input  # id, handle (None if center)
        self.nbr_center: dict[int, int] = {}
        self.queue: list[int] = []
        self.gcn: set[int] = set()
        self.reporters: dict[int, list[int]] = {}  # center only: foreign cluster -> members touching it
        self.stage = 0
        self.done = False

    def send(self, rnd):
        if self.stage == 0:
            self.stage = 1
            tok = (S_ID, self.my_center)
            return [(self.view.neighbors, tok)]
        if self.queue:
            out = [(self.center_handle, (FOREIGN, self.queue.pop()))]
            self.done = not self.queue
            return out
        self.done = True
        return None

    def receive(self, rnd, inbox):
        for u, tok in inbox.items():
            if tok[0] == S_ID:
                self.nbr_center[u] = tok[1]
            else:
                self.gcn.add(tok[1])
                self.reporters.setdefault(tok[1], []).append(u)
        if rnd == 1:
            foreign = sorted({c for c in self.nbr_center.values() if c != self.my_center}, reverse=True)
            if self.center_handle is None:
                self.gcn.update(foreign)
                self.done = True
            else:
                self.queue = foreign
                self.done = not foreign

    def output(self):
        return self.nbr_center, self.gcn, self.reporters


class _PortProgram(NodeProgram):
    """Each center names one port per adjacent foreign cluster.

    A center is its own port wherever it touches the cluster; otherwise the
    least-loaded reporting member (then lowest id) gets it. Assignments
    stream as one ``(PORT, cluster)`` token per member edge per round.
    """

    def __init__(self, view):
        super().__init__(view)
        own, reporters = view.input  # own foreign centers; reporters (None at members)
        self.ports: set[int] = set()
        self.queues: dict[int, list[int]] = {}
        if reporters is not None:
            ids = view.neighbor_ids
            load: dict[int, int] = {}
            for c in sorted(set(reporters) | own):
                if c in own:
                    self.ports.add(c)
                    continue
                u = min(reporters[c], key=lambda x: (load.get(x, 0), ids[x]))
                load[u] = load.get(u, 0) + 1
                self.queues.setdefault(u, []).append(c)
            for q in self.queues.values():
                q.reverse()
        self.done = not self.queues

    def send(self, rnd):
        out = [(u, (PORT, q.pop())) for u, q in self.queues.items()]
        self.queues = {u: q for u, q in self.queues.items() if q}
        self.done = not self.queues
        return out

    def receive(self, rnd, inbox):
        for tok in inbox.values():
            self.ports.add(tok[1])

    def output(self):
        return self.ports


# ---------------------------------------------------------------- relayed DFS / BFS


class _RelayProgram(NodeProgram):
    """Cluster-graph message passing via the three-hop relay.

    ``mode`` is ``"dfs"`` (token walk assigning Euler timestamps) or ``"bfs"``
    (all-source BFS where the center with timestamp pi starts at virtual
    round 2 pi).
    """

    def __init__(self, view):
        super().__init__(view)
        inp = view.input
        self.mode = inp["mode"]
        self.me = view.id
        self.cid = inp["center_id"]
        self.center_handle = inp["center_handle"]  # None at centers
        self.is_center = self.center_handle is None
        nbr_center = inp["nbr_center"]
        ports = inp["ports"]
        self.members = tuple(u for u in view.neighbors if nbr_center[u] == self.me) if self.is_center else ()
        # as port for a foreign cluster, use one cross edge into it: the lowest-id neighbor there
        reps: dict[int, int] = {}
        for u in view.neighbors:
            c = nbr_center[u]
            if c in ports and (c not in reps or view.neighbor_ids[u] < view.neighbor_ids[reps[c]]):
                reps[c] = u
        self.foreign = tuple(sorted(reps.values()))
        self.gcn = sorted(inp.get("gcn", ()))
        self.base = 1 if self.mode == "dfs" else 0
        self.collisions = 0
        self.to_foreign = None  # token to push out this/next round
        self.to_center: list[tuple] = []
        self.buffer: list[tuple] = []  # center only: arrivals awaiting processing
        self.outbox: list[tuple] = []  # center only: tokens queued for members
        self.known: set[int] = set()  # bfs: sources our center already has
        self.leader_start = inp.get("leader", False) and not self.is_center and self.mode == "dfs"
        # dfs state
        self.visited: set[int] = set()
        self.pi = None
        self.dfs_parent = None
        self.dfs_start = False
        # bfs state
        self.dist: dict[int, int] = {}
        self.start_round = None
        if self.is_center:
            if self.mode == "dfs":
                self.dfs_start = inp.get("leader", False)
            else:
                self.dist[self.me] = 0
                self.known.add(self.me)
                self.pi = inp["pi"]
                if self.gcn:
                    self.start_round = 3 * (2 * self.pi) + self.base + 1
                    self.wake_at = self.start_round
        self.done = not (self.leader_start or self.dfs_start)

    # -- helpers
    def _slot0(self, rnd):
        return rnd > self.base and (rnd - self.base - 1) % 3 == 0

    def _center_step(self, rnd):
        """Runs at slot-0 rounds: digest arrivals, emit at most one token."""
        if self.mode == "dfs":
            self._dfs_step()
        else:
            self._bfs_step(rnd)
        if self.outbox:
            return self.outbox.pop(0)
        return None

    def _dfs_step(self):
        got_token = None
        for tok in set(self.buffer):
            _, sender, target, counter, kind = tok
            self.visited.add(sender)
            if target == self.me:
                got_token = (sender, counter, kind)
        self.buffer = []
        if self.dfs_start:
            self.dfs_start = False
            self.pi = 0
            self.visited.add(self.me)
            self._dfs_move(0)
        elif got_token is not None:
            sender, counter, kind = got_token
            if self.pi is None:
                self.pi = counter
                self.dfs_parent = sender
                self.visited.add(self.me)
            self._dfs_move(counter)

    def _dfs_move(self, counter):
        nxt = next((c for c in self.gcn if c not in self.visited), None)
        if nxt is not None:
            self.outbox.append((DFS, self.me, nxt, counter + 1, FWD))
        elif self.dfs_parent is not None:
            self.outbox.append((DFS, self.me, self.dfs_parent, counter + 1, BACK))

    def _bfs_step(self, rnd):
        fresh: dict[int, int] = {}
        for _, src, d in self.buffer:
            if src not in self.dist and (src not in fresh or d < fresh[src]):
                fresh[src] = d
        self.buffer = []
        if len(fresh) > 1:
            self.collisions += 1
        for src in sorted(fresh):
            self.dist[src] = fresh[src] + 1
            self.outbox.append((BFS, src, self.dist[src]))
        if rnd == self.start_round:
            self.outbox.append((BFS, self.me, 0))
            if len(self.outbox) > 1:
                self.collisions += 1

    def _busy(self):
        return (
            self.to_foreign is not None
            or bool(self.to_center or self.buffer or self.outbox)
            or self.leader_start
            or self.dfs_start
        )

    def send(self, rnd):
        out = []
        if self.leader_start:
            self.leader_start = False
            out.append((self.center_handle, (START,)))
        if self.to_foreign is not None:
            tok = self.to_foreign
            if self.foreign:
                out.append((self.foreign, tok))
            self.to_foreign = None
        if self.to_center:
            distinct = sorted(set(self.to_center))
            if self.mode == "bfs" and len({t[1] for t in distinct}) > 1:
                self.collisions += 1
            out.append((self.center_handle, distinct[0]))
            self.to_center = []
        if self.is_center and self._slot0(rnd):
            tok = self._center_step(rnd)
            if self.start_round is not None and rnd >= self.start_round:
                self.start_round = -1
            if tok is not None:
                if self.members:
                    out.append((self.members, tok))
                if self.mode == "bfs":
                    self.known.add(tok[1])
                self.to_foreign = tok
        self.done = not self._busy()
        return out

    def receive(self, rnd, inbox):
        ch = self.center_handle
        known = self.known
        sink = self.buffer if self.is_center else self.to_center
        for u, tok in inbox.items():
            if u == ch:
                # our center's token for this virtual round: fan out next round
                if tok[0] == BFS:
                    known.add(tok[1])
                self.to_foreign = tok
                continue
            tag = tok[0]
            if tag == BFS:
                if tok[1] in known:
                    continue
            elif tag == START:
                self.dfs_start = True
                continue
            sink.append(tok)
        self.done = not self._busy()

    def output(self):
        return {"pi": self.pi, "dist": self.dist, "collisions": self.collisions}


@dataclass
class ClusterAPSP:
    dist: dict[int, dict[int, int]]  # center handle -> center handle -> hops in G_c
    pi: dict[int, int]
    gcn: dict[int, set[int]]
    collisions: int
    stages: dict[str, int] = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return sum(self.stages.values())


def cluster_apsp(g: Graph, clus: ClusterAssignment, seed: int = 0, ledger: Ledger | None = None) -> ClusterAPSP:
    """All-pairs distances of the cluster graph, computed on the simulator."""
    led = ledger or Ledger(g)
    ids = g.node_ids
    handle = {ids[v]: v for v in range(g.n)}
    is_center = set(clus.centers)
    if any(clus.s[v] == v for v in range(g.n) if v not in is_center) or any(
        clus.s[c] != c for c in is_center
    ):
        raise CoverageError(next(v for v in range(g.n) if clus.s[v] is None))
    start = dict(led.stages)

    gather_in = [(ids[clus.s[v]], None if v in is_center else clus.s[v]) for v in range(g.n)]
    res = led.add("cluster_graph", run(g, _GatherProgram, seed=seed, inputs=gather_in, round_cap=4 * g.n + 8))
    gathered = res.outputs()
    port_in = []
    for v in range(g.n):
        nbr_center, _, reporters = gathered[v]
        own = {c for c in nbr_center.values() if c != ids[clus.s[v]]}
        port_in.append((own, reporters if v in is_center else None))
    res = led.add("cluster_graph", run(g, _PortProgram, seed=seed, inputs=port_in, round_cap=4 * g.n + 8))
    ports = res.outputs()

    lead = leader(g)
    root_center = clus.s[lead]

    def relay_inputs(mode, pis=None):
        rows = []
        for v in range(g.n):
            nbr_center, gcn, _ = gathered[v]
            d = {
                "mode": mode,
                "center_id": ids[clus.s[v]],
                "center_handle": None if v in is_center else clus.s[v],
                "nbr_center": nbr_center,
                "ports": ports[v],
                "gcn": gcn,
                "leader": v == lead or (mode == "dfs" and v == root_center and lead == root_center),
            }
            if pis is not None and v in is_center:
                d["pi"] = pis[ids[v]]
            rows.append(d)
        return rows

    k = len(clus.centers)
    res = led.add("dfs", run(g, _RelayProgram, seed=seed, inputs=relay_inputs("dfs"), round_cap=12 * k + 16))
    outs = res.outputs()
    pis = {ids[c]: outs[c]["pi"] for c in clus.centers}
    unvisited = [c for c, p in pis.items() if p is None]
    if unvisited:
        raise RuntimeError(f"cluster-graph DFS missed center {unvisited[0]}")
    res = led.add("bfs", run(g, _RelayProgram, seed=seed, inputs=relay_inputs("bfs", pis), round_cap=30 * k + 16))
    outs = res.outputs()
    collisions = sum(o["collisions"] for o in outs)
    dist = {c: {handle[x]: d for x, d in outs[c]["dist"].items()} for c in clus.centers}
    stages = {s: r - start.get(s, 0) for s, r in led.stages.items() if r - start.get(s, 0)}
    return ClusterAPSP(
        dist,
        {handle[x]: p for x, p in pis.items()},
        {c: {handle[x] for x in gathered[c][1]} for c in clus.centers},
        collisions,
        stages,
    )


# ---------------------------------------------------------------- rows to members


class _RowProgram(NodeProgram):
    def __init__(self, view):
        super().__init__(view)
        self.cid, self.center_handle, members, row = view.input
        self.members = members
        self.queue = sorted(row.items(), reverse=True) if members else []
        self.row = dict(row) if row else {self.cid: None}
        if self.center_handle is not None:
            self.row = {self.cid: 0}
        self.done = not self.queue

    def send(self, rnd):
        c, d = self.queue.pop()
        self.done = not self.queue
        tok = (ROW, c, d)
        return [(self.members, tok)]

    def receive(self, rnd, inbox):
        for tok in inbox.values():
            self.row[tok[1]] = tok[2]

    def output(self):
        return self.row


# ---------------------------------------------------------------- full pipeline


@dataclass
class DistanceEstimate:
    table: np.ndarray
    alpha: float
    beta: float
    centers: tuple[int, ...] = ()
    s: list[int] = field(default_factory=list)


def auto_packing(g: Graph, C: float = DEFAULT_C, bound_const: float = DEFAULT_BOUND_CONST, seed: int = 0) -> TreePacking:
    """Tree packing without knowing connectivity (exponential search)."""
    found = exponential_search(g, C, bound_const, seed)
    return build_trees(g, found.partition, seed)


def estimate_unweighted_apsp(
    g: Graph,
    c: float = 3.0,
    C: float = DEFAULT_C,
    seed: int = 0,
    packing: TreePacking | None = None,
    retries: int = MAX_RESEEDS,
    lam: int | None = None,
) -> tuple[DistanceEstimate, RunReport]:
    if g.weighted:
        raise ValueError("unweighted APSP expects a unit-weight graph")
    led = Ledger(g)
    if packing is None:
        packing = auto_packing(g, C, seed=seed)
    led.stages["packing"] = packing.rounds
    for attempt in range(retries + 1):
        try:
            clus, rounds = sample_clusters(g, c, derive_seed(seed, attempt) if attempt else seed)
            break
        except CoverageError:
            led.stages["clustering"] = led.stages.get("clustering", 0) + 1
            if attempt == retries:
                raise
    led.stages["clustering"] = led.stages.get("clustering", 0) + rounds
    capsp = cluster_apsp(g, clus, seed, ledger=led)
    if capsp.collisions:
        raise CollisionError(f"{capsp.collisions} relay collisions")

    ids = g.node_ids
    clusters = clus.clusters()
    row_in = []
    for v in range(g.n):
        if clus.s[v] == v:
            row = {ids[x]: d for x, d in capsp.dist[v].items() if x != v}
            row_in.append((ids[v], None, tuple(u for u in clusters[v] if u != v), row))
        else:
            row_in.append((ids[clus.s[v]], clus.s[v], (), None))
    res = led.add("rows", run(g, _RowProgram, seed=seed, inputs=row_in, round_cap=2 * g.n + 8))
    rows = res.outputs()
    for v in clus.centers:
        rows[v] = {ids[x]: d for x, d in capsp.dist[v].items()}

    inst = BroadcastInstance([(v, (ids[v], ids[clus.s[v]])) for v in range(g.n)])
    bc = k_broadcast(g, inst, packing, seed, lam=lam)
    for stage, r in bc.report.stages.items():
        led.stages["broadcast_" + stage] = r

    handle = {ids[v]: v for v in range(g.n)}
    table = np.empty((g.n, g.n), dtype=np.int64)
    for v in range(g.n):
        learned = bc.received[v]
        row = rows[v]
        cols = np.empty(g.n, dtype=np.int64)
        for node_id, center_id in learned.values():
            cols[handle[node_id]] = row[center_id]
        table[v] = 3 * cols + 2
    report = led.report(correctness=bc.report.correctness)
    report.max_edge_congestion = max(report.max_edge_congestion, bc.report.max_edge_congestion)
    report.reference_lower_bound = None if lam is None else -(-g.n // lam)
    report.extra.update(
        centers=len(clus.centers),
        collisions=capsp.collisions,
        parts=len(packing.trees),
    )
    return DistanceEstimate(table, 3, 2, clus.centers, clus.s), report


def worst_approximation(est: np.ndarray, exact: np.ndarray, alpha: float) -> tuple[float, float]:
    """Observed (max ratio over d>0, max additive excess over alpha*d)."""
    mask = exact > 0
    ratio = float((est[mask] / exact[mask]).max()) if mask.any() else 1.0
    beta = float((est - alpha * exact).max())
    return ratio, beta
