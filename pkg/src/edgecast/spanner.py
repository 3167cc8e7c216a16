"""Distributed Baswana-Sen spanner and the weighted APSP pipeline built on it.

The spanner runs on a fixed round schedule. Iteration ``i`` (``1 <= i < r``)
takes ``i + 1`` rounds:

* ``i - 1`` rounds flooding each center's sample bit through its cluster,
* one round telling alive neighbors (cluster, sampled),
* one round announcing (new cluster, edge removed) after the local decision.

A final round runs after the last iteration. Each node adds its lightest
edge into every adjacent cluster, then tells neighbors which edges it added,
so each spanner edge gets exactly one owner: the adding endpoint, with the
smaller ID breaking ties when both ends added it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .apsp import DistanceEstimate, auto_packing
from .broadcast import BroadcastInstance, k_broadcast
from .graph import Graph
from .packing import DEFAULT_C, TreePacking
from .sim import Ledger, NodeProgram, RunReport, run

PROP, EXCH, ANN, ADDED = 21, 22, 23, 24


def spanner_schedule(r: int) -> list[tuple[int, int, str]]:
    """Per round: (iteration, offset, kind)."""
    out = []
    for i in range(1, r):
        out += [(i, j, "prop") for j in range(i - 1)]
        out.append((i, i - 1, "exch"))
        out.append((i, i, "ann"))
    out.append((r, 0, "final"))
    return out


def auto_stretch(n: int) -> int:
    """ceil(log2 n / log2 log2 n), at least 1."""
    if n < 4:
        return 1
    lg = math.log2(n)
    return max(1, math.ceil(lg / math.log2(lg)))


class _SpannerProgram(NodeProgram):
    def __init__(self, view):
        super().__init__(view)
        r, p = view.input
        self.p = p
        self.sched = spanner_schedule(r)
        self.me = view.id
        self.cluster: int | None = view.id
        self.nbr_cluster: dict[int, int | None] = dict(view.neighbor_ids)
        self.alive = set(view.neighbors)
        self.added: set[int] = set()
        self.other_added: set[int] = set()
        self.info: dict[int, tuple[int, int]] = {}
        self.bit: int | None = None
        self.flooded = False
        self.done = False

    def _key(self, u):
        a, b = self.me, self.view.neighbor_ids[u]
        return (self.view.weights[u], min(a, b), max(a, b))

    def _settle(self):
        # drop alive edges that became intra-cluster
        if self.cluster is None:
            self.alive.clear()
        else:
            self.alive = {u for u in self.alive if self.nbr_cluster.get(u) != self.cluster}

    def _lightest_per_cluster(self, clusters: dict[int, int | None]):
        best: dict[int, int] = {}
        for u in self.alive:
            c = clusters.get(u)
            if c is None:
                continue
            if c not in best or self._key(u) < self._key(best[c]):
                best[c] = u
        return best

    def _decide(self):
        """Local rule after learning neighbors' clusters and sample bits."""
        start_alive = tuple(sorted(self.alive))
        removed: set[int] = set()
        if self.cluster is not None and not self.bit:
            clusters = {u: c for u, (c, _) in self.info.items() if u in self.alive}
            sampled = {c for c, b in self.info.values() if b}
            best = self._lightest_per_cluster(clusters)
            cand = [c for c in best if c in sampled]
            if not cand:
                self.added.update(best.values())
                removed = set(self.alive)
                self.cluster = None
            else:
                star = min(cand, key=lambda c: self._key(best[c]))
                kstar = self._key(best[star])
                drop = {star} | {c for c, u in best.items() if self._key(u) < kstar}
                for c in drop:
                    self.added.add(best[c])
                removed = {u for u in self.alive if clusters.get(u) in drop}
                self.cluster = star
        self.alive -= removed
        return start_alive, removed

    def send(self, rnd):
        i, off, kind = self.sched[rnd - 1]
        self._settle()
        if kind in ("prop", "exch") and off == 0:
            self.info = {}
            self.flooded = False
            self.bit = None
            if self.cluster == self.me:
                self.bit = int(self.view.rng.random() < self.p)
        if kind == "prop":
            if self.bit is not None and not self.flooded and self.cluster is not None:
                self.flooded = True
                ports = tuple(u for u in self.view.neighbors if self.nbr_cluster.get(u) == self.cluster)
                if ports:
                    return [(ports, (PROP, self.cluster, self.bit))]
            return None
        if kind == "exch":
            if self.cluster is None or not self.alive:
                return None
            return [(tuple(sorted(self.alive)), (EXCH, self.cluster, self.bit))]
        if kind == "ann":
            was_clustered = self.cluster is not None
            ports, removed = self._decide()
            if not was_clustered or not ports:
                return None
            has = int(self.cluster is not None)
            c = self.cluster if has else 0
            out = []
            for u in ports:
                out.append((u, (ANN, has, c, int(u in removed))))
            return out
        # final round
        for u in self._lightest_per_cluster(self.nbr_cluster).values():
            self.added.add(u)
        self.done = True
        return [(tuple(sorted(self.added)), (ADDED,))] if self.added else None

    def receive(self, rnd, inbox):
        kind = self.sched[rnd - 1][2]
        for u, tok in inbox.items():
            tag = tok[0]
            if tag == PROP:
                if tok[1] == self.cluster and self.bit is None:
                    self.bit = tok[2]
            elif tag == EXCH:
                self.info[u] = (tok[1], tok[2])
                self.nbr_cluster[u] = tok[1]
            elif tag == ANN:
                self.nbr_cluster[u] = tok[2] if tok[1] else None
                if tok[3]:
                    self.alive.discard(u)
            elif tag == ADDED:
                self.other_added.add(u)
        if kind == "ann":
            self._settle()

    def output(self):
        ids = self.view.neighbor_ids
        return sorted(
            (self.me, ids[u], self.view.weights[u])
            for u in self.added
            if u not in self.other_added or self.me < ids[u]
        )


@dataclass
class Spanner:
    graph: Graph  # subgraph H of g on the same node set
    r: int
    rounds: int
    owned: list[list[tuple[int, int, int]]]  # per node: (own id, other id, w)

    @property
    def m(self) -> int:
        return self.graph.m


def baswana_sen_spanner(g: Graph, r: int, seed: int = 0, ledger: Ledger | None = None) -> Spanner:
    """(2r - 1)-spanner of a weighted graph, built on the simulator."""
    if r < 1:
        raise ValueError("spanner parameter r must be >= 1")
    p = g.n ** (-1.0 / r)
    res = run(g, _SpannerProgram, seed=seed, inputs=[(r, p)] * g.n, round_cap=r * r + 4)
    if ledger is not None:
        ledger.add("spanner", res)
    owned = res.outputs()
    handle = {x: v for v, x in enumerate(g.node_ids)}
    eids = sorted(g.edge_id(handle[a], handle[b]) for rows in owned for a, b, _ in rows)
    if len(set(eids)) != len(eids):
        raise RuntimeError("spanner edge owned twice")
    return Spanner(g.subgraph(eids), r, res.rounds, owned)


def estimate_weighted_apsp(
    g: Graph,
    r: int | None = None,
    C: float = DEFAULT_C,
    seed: int = 0,
    packing: TreePacking | None = None,
    lam: int | None = None,
) -> tuple[DistanceEstimate, RunReport, Spanner]:
    """Spanner, broadcast of its edges, then local shortest paths at every node.

    ``r=None`` picks ``auto_stretch(n)``.
    """
    if r is None:
        r = auto_stretch(g.n)
    led = Ledger(g)
    if packing is None:
        packing = auto_packing(g, C, seed=seed)
    led.stages["packing"] = packing.rounds
    sp = baswana_sen_spanner(g, r, seed, ledger=led)
    ids = g.node_ids
    handle = {x: v for v, x in enumerate(ids)}
    inst = BroadcastInstance([(handle[a], (a, b, w)) for rows in sp.owned for a, b, w in rows])
    bc = k_broadcast(g, inst, packing, seed, lam=lam)
    for stage, rr in bc.report.stages.items():
        led.stages["broadcast_" + stage] = rr

    # nodes holding identical spanner copies build identical local graphs;
    # each still runs its own single-source search
    table = np.empty((g.n, g.n), dtype=np.float64)
    cache: dict[frozenset, csr_matrix] = {}
    for v in range(g.n):
        edges = frozenset(bc.received[v].values())
        mat = cache.get(edges)
        if mat is None:
            rows = [handle[a] for a, _, _ in edges]
            cols = [handle[b] for _, b, _ in edges]
            mat = csr_matrix(([w for _, _, w in edges], (rows, cols)), shape=(g.n, g.n))
            cache[edges] = mat
        table[v] = dijkstra(mat, directed=False, indices=v)
    report = led.report(correctness=bc.report.correctness)
    report.max_edge_congestion = max(report.max_edge_congestion, bc.report.max_edge_congestion)
    report.reference_lower_bound = bc.report.reference_lower_bound
    report.extra.update(spanner_edges=sp.m, r=r, parts=len(packing.trees))
    est = DistanceEstimate(table, 2 * r - 1, 0)
    return est, report, sp
