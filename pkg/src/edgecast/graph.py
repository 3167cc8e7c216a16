"""Graphs, test-instance generators and exact (centralized) oracles.

The oracles here are the ground truth every distributed pipeline is checked
against. They are deliberately independent of the simulator code paths.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow, shortest_path

ID_EXPONENT = 3  # node ids and weights live in [n^c]
MAX_CUT_ENUM_N = 20


class GraphError(ValueError):
    """Malformed graph or invalid generator parameters."""


class GenerationError(RuntimeError):
    """A randomized generator gave up after its retry budget."""


class Graph:
    """Simple undirected graph with positive integer weights.

    Edges are stored once as ``(u, v, w)`` with ``u < v``; ``adj[v]`` lists
    ``(neighbor, edge_id)`` pairs. Instances are treated as immutable.
    """

    def __init__(
        self,
        n: int,
        edges: Sequence[tuple[int, ...]],
        node_ids: Sequence[int] | None = None,
    ):
        if n < 1:
            raise GraphError("graph needs at least one node")
        norm = []
        seen = set()
        for e in edges:
            if len(e) == 2:
                u, v, w = e[0], e[1], 1
            elif len(e) == 3:
                u, v, w = e
            else:
                raise GraphError(f"bad edge record {e!r}")
            u, v, w = int(u), int(v), int(w)
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) out of range for n={n}")
            if w < 1:
                raise GraphError(f"edge ({u}, {v}) has non-positive weight {w}")
            if u > v:
                u, v = v, u
            if (u, v) in seen:
                raise GraphError(f"parallel edge ({u}, {v})")
            seen.add((u, v))
            norm.append((u, v, w))
        self.n = n
        self.edges: tuple[tuple[int, int, int], ...] = tuple(norm)
        adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for eid, (u, v, _) in enumerate(self.edges):
            adj[u].append((v, eid))
            adj[v].append((u, eid))
        self.adj = tuple(tuple(a) for a in adj)
        if node_ids is None:
            self.node_ids = tuple(range(n))
        else:
            ids = tuple(int(x) for x in node_ids)
            if len(ids) != n or len(set(ids)) != n:
                raise GraphError("node_ids must be n distinct integers")
            self.node_ids = ids

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def weighted(self) -> bool:
        return any(w != 1 for _, _, w in self.edges)

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    @cached_property
    def min_degree(self) -> int:
        return min(len(a) for a in self.adj)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(u, v): eid for eid, (u, v, _) in enumerate(self.edges)}

    def edge_id(self, u: int, v: int) -> int:
        return self.edge_index[(u, v) if u < v else (v, u)]

    def subgraph(self, edge_ids) -> "Graph":
        """Spanning subgraph on the same node set keeping ``edge_ids``."""
        return Graph(self.n, [self.edges[e] for e in sorted(edge_ids)], self.node_ids)

    def with_ids(self, node_ids: Sequence[int]) -> "Graph":
        return Graph(self.n, self.edges, node_ids)

    def csr(self, weighted: bool = False) -> csr_matrix:
        if self.m == 0:
            return csr_matrix((self.n, self.n), dtype=np.int64)
        e = np.asarray(self.edges, dtype=np.int64)
        data = e[:, 2] if weighted else np.ones(len(e), dtype=np.int64)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return csr_matrix((np.concatenate([data, data]), (rows, cols)), shape=(self.n, self.n))

    def stats(self) -> "GraphStats":
        return GraphStats(self.min_degree, exact_edge_connectivity(self), exact_diameter(self))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and sorted(self.edges) == sorted(other.edges)
            and self.node_ids == other.node_ids
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class GraphStats:
    min_degree: int
    edge_connectivity: int
    diameter: float


# ---------------------------------------------------------------- generators


def complete(n: int) -> Graph:
    if n < 1:
        raise GraphError("complete graph needs n >= 1")
    return Graph(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def path(n: int) -> Graph:
    if n < 1:
        raise GraphError("path needs n >= 1")
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle(n: int) -> Graph:
    if n < 3:
        raise GraphError("cycle needs n >= 3")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def star(leaves: int) -> Graph:
    return Graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def hypercube(d: int) -> Graph:
    if d < 1:
        raise GraphError("hypercube needs dimension >= 1")
    n = 1 << d
    return Graph(n, [(v, v ^ (1 << b)) for v in range(n) for b in range(d) if v < v ^ (1 << b)])


def circulant(n: int, s: int) -> Graph:
    """Circulant graph with connection set {+-1, ..., +-s}."""
    if n < 3 or not 1 <= s <= (n - 1) // 2:
        raise GraphError("circulant needs n >= 3 and 1 <= s <= (n-1)/2")
    edges = set()
    for v in range(n):
        for j in range(1, s + 1):
            u = (v + j) % n
            edges.add((min(u, v), max(u, v)))
    return Graph(n, sorted(edges))


def barbell(clique: int, bridge: int = 0) -> Graph:
    """Two K_clique joined by a path with ``bridge`` inner nodes."""
    if clique < 2 or bridge < 0:
        raise GraphError("barbell needs clique >= 2 and bridge >= 0")
    edges = [(u, v) for u in range(clique) for v in range(u + 1, clique)]
    off = clique + bridge
    edges += [(off + u, off + v) for u in range(clique) for v in range(u + 1, clique)]
    chain = [clique - 1] + [clique + i for i in range(bridge)] + [off]
    edges += list(zip(chain, chain[1:]))
    return Graph(2 * clique + bridge, edges)


def _pair_stubs(n: int, d: int, rng: random.Random) -> set[tuple[int, int]] | None:
    # Pairing model; bad pairs (loops, repeats) are returned to the stub pool.
    edges: set[tuple[int, int]] = set()
    stubs = [v for v in range(n) for _ in range(d)]
    while stubs:
        rng.shuffle(stubs)
        leftover: dict[int, int] = {}
        it = iter(stubs)
        for a, b in zip(it, it):
            if a > b:
                a, b = b, a
            if a != b and (a, b) not in edges:
                edges.add((a, b))
            else:
                leftover[a] = leftover.get(a, 0) + 1
                leftover[b] = leftover.get(b, 0) + 1
        if leftover:
            nodes = list(leftover)
            if not any(
                x < y and (x, y) not in edges for x in nodes for y in nodes
            ):
                return None
        stubs = [v for v, c in leftover.items() for _ in range(c)]
    return edges


def random_regular(n: int, d: int, seed: int = 0, max_tries: int = 200) -> Graph:
    if d < 1 or d >= n or (n * d) % 2:
        raise GraphError("random_regular needs 1 <= d < n and n*d even")
    rng = random.Random(seed)
    for _ in range(max_tries):
        edges = _pair_stubs(n, d, rng)
        if edges is None:
            continue
        g = Graph(n, sorted(edges))
        if is_connected(g):
            return g
    raise GenerationError(f"no connected simple {d}-regular graph on {n} nodes after {max_tries} tries")


GENERATORS = {
    "complete": complete,
    "path": path,
    "cycle": cycle,
    "star": star,
    "hypercube": hypercube,
    "circulant": circulant,
    "barbell": barbell,
    "random_regular": random_regular,
}


def generate(kind: str, seed: int = 0, **params) -> Graph:
    """Build a graph of family ``kind``; only ``random_regular`` uses ``seed``."""
    try:
        fn = GENERATORS[kind]
    except KeyError:
        raise GraphError(f"unknown graph kind {kind!r}; choose from {sorted(GENERATORS)}") from None
    if kind == "random_regular":
        params["seed"] = seed
    try:
        return fn(**params)
    except TypeError as exc:
        raise GraphError(f"bad parameters for {kind}: {exc}") from None


def with_random_weights(g: Graph, wmax: int, seed: int = 0) -> Graph:
    if wmax < 1 or wmax > max(g.n, 2) ** ID_EXPONENT:
        raise GraphError("weights must lie in [1, n^3]")
    rng = random.Random(seed)
    return Graph(g.n, [(u, v, rng.randint(1, wmax)) for u, v, _ in g.edges], g.node_ids)


def with_random_ids(g: Graph, seed: int = 0, c: int = ID_EXPONENT) -> Graph:
    """Relabel with distinct random identifiers drawn from [1, n^c]."""
    space = max(g.n, 2) ** c
    ids = random.Random(seed).sample(range(1, space + 1), g.n)
    return g.with_ids(ids)


# ---------------------------------------------------------------- text format


def parse_graph(text: str) -> Graph:
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows:
        raise GraphError("empty graph file")
    head = rows[0]
    if len(head) not in (2, 3) or (len(head) == 3 and head[2] != "weighted"):
        raise GraphError("header must be 'n m [weighted]'")
    n, m = int(head[0]), int(head[1])
    weighted = len(head) == 3
    body = rows[1:]
    if len(body) != m:
        raise GraphError(f"header promises {m} edges, found {len(body)}")
    edges = []
    for r in body:
        if len(r) != (3 if weighted else 2):
            raise GraphError(f"bad edge line {' '.join(r)!r}")
        edges.append(tuple(int(x) for x in r))
    return Graph(n, edges)


def format_graph(g: Graph) -> str:
    weighted = g.weighted
    lines = [f"{g.n} {g.m}" + (" weighted" if weighted else "")]
    for u, v, w in g.edges:
        lines.append(f"{u} {v} {w}" if weighted else f"{u} {v}")
    return "\n".join(lines) + "\n"


def read_graph(path_: str) -> Graph:
    with open(path_, encoding="utf-8") as f:
        return parse_graph(f.read())


def write_graph(g: Graph, path_: str) -> None:
    with open(path_, "w", encoding="utf-8") as f:
        f.write(format_graph(g))


# ---------------------------------------------------------------- oracles


def is_connected(g: Graph) -> bool:
    seen = [False] * g.n
    seen[0] = True
    stack = [0]
    count = 1
    while stack:
        v = stack.pop()
        for u, _ in g.adj[v]:
            if not seen[u]:
                seen[u] = True
                count += 1
                stack.append(u)
    return count == g.n


def oracle_apsp(g: Graph, weighted: bool = False) -> np.ndarray:
    """Exact all-pairs distances; unreachable pairs are ``inf``."""
    if weighted:
        return shortest_path(g.csr(weighted=True), method="D", directed=False)
    return shortest_path(g.csr(), method="D", directed=False, unweighted=True)


def exact_diameter(g: Graph) -> float:
    """Hop diameter; ``math.inf`` when the graph is disconnected."""
    if g.n == 1:
        return 0
    d = oracle_apsp(g)
    top = d.max()
    return math.inf if np.isinf(top) else int(top)


def eccentricity(g: Graph, v: int) -> float:
    d = shortest_path(g.csr(), method="D", directed=False, unweighted=True, indices=v)
    top = d.max()
    return math.inf if np.isinf(top) else int(top)


def _unit_capacity(g: Graph) -> csr_matrix:
    e = np.asarray([(u, v) for u, v, _ in g.edges], dtype=np.int32).reshape(-1, 2)
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    data = np.ones(len(rows), dtype=np.int32)
    return csr_matrix((data, (rows, cols)), shape=(g.n, g.n))


def min_cut(g: Graph) -> tuple[int, frozenset[int]]:
    """Global minimum cut of the unweighted graph as ``(value, side)``.

    Runs ``n - 1`` max-flows from a minimum-degree node; the source lies on
    one side of some minimum cut, so the smallest s-t flow is the global
    minimum. ``side`` is the source side and never equals the full node set.
    """
    if g.n < 2:
        raise GraphError("minimum cut needs n >= 2")
    if not is_connected(g):
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for u, _ in g.adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return 0, frozenset(seen)
    cap = _unit_capacity(g)
    s = min(range(g.n), key=lambda v: (g.degree(v), v))
    best = g.degree(s) + 1
    best_t = None
    for t in range(g.n):
        if t == s:
            continue
        val = maximum_flow(cap, s, t, method="dinic").flow_value
        if val < best:
            best, best_t = val, t
    if g.degree(s) <= best:
        return g.degree(s), frozenset([s])
    res = maximum_flow(cap, s, best_t, method="dinic")
    residual = (cap - res.flow).tocsr()
    residual.eliminate_zeros()
    seen = {s}
    stack = [s]
    while stack:
        v = stack.pop()
        lo, hi = residual.indptr[v], residual.indptr[v + 1]
        for u, c in zip(residual.indices[lo:hi], residual.data[lo:hi]):
            if c > 0 and int(u) not in seen:
                seen.add(int(u))
                stack.append(int(u))
    return int(best), frozenset(seen)


def exact_edge_connectivity(g: Graph) -> int:
    """Edge connectivity of the unweighted graph (0 when disconnected)."""
    return min_cut(g)[0]


def cut_value(g: Graph, side) -> int:
    side = set(side)
    return sum(w for u, v, w in g.edges if (u in side) != (v in side))


def all_cut_values(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """Bitmasks of every proper side containing node 0, and their cut weights.

    Bit ``i`` of a mask marks node ``i`` as lying on node 0's side.
    """
    if g.n > MAX_CUT_ENUM_N:
        raise GraphError(f"cut enumeration is limited to n <= {MAX_CUT_ENUM_N}")
    if g.n < 2:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    rest = np.arange(0, (1 << (g.n - 1)) - 1, dtype=np.int64)  # excludes S = V
    masks = (rest << 1) | 1
    return masks, cut_values(g, masks)


def cut_values(g: Graph, masks: np.ndarray, weights=None) -> np.ndarray:
    """Cut weight of each bitmask side; ``weights`` overrides edge weights."""
    masks = np.asarray(masks, dtype=np.int64)
    out = np.zeros(masks.shape, dtype=np.float64 if weights is not None else np.int64)
    ws = [w for _, _, w in g.edges] if weights is None else weights
    for (u, v, _), w in zip(g.edges, ws):
        out += w * (((masks >> u) ^ (masks >> v)) & 1)
    return out


def enumerate_cuts(g: Graph) -> Iterator[tuple[frozenset[int], int]]:
    masks, values = all_cut_values(g)
    for mask, val in zip(masks.tolist(), values.tolist()):
        yield frozenset(i for i in range(g.n) if mask >> i & 1), val
