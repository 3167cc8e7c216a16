"""Cut estimation: sample a sparsifier, broadcast it, answer cut queries locally.

The sparsifier keeps every edge with probability
``q = min(1, c_s ln n / (eps^2 lam))`` and gives kept edges weight ``1/q``.
On the wire that weight is a fixed-point integer with ``ceil(log2 n)``
fractional bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .broadcast import BroadcastInstance, k_broadcast
from .graph import MAX_CUT_ENUM_N, Graph, cut_value
from .packing import TreePacking
from .sim import RunReport

DEFAULT_CS = 3.0


class EncodingError(ValueError):
    """A sparsifier weight does not fit its token field."""


def frac_bits(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def weight_field_bits(n: int) -> int:
    return 2 * frac_bits(n)


def sample_probability(n: int, eps: float, c_s: float, lam: int) -> float:
    return min(1.0, c_s * math.log(n) / (eps * eps * lam))


def quantize(weight: float, n: int) -> int:
    """Fixed-point encoding of ``weight``; raises if it overflows the field."""
    f = frac_bits(n)
    wq = round(weight * (1 << f))
    if wq < 1 or wq.bit_length() > weight_field_bits(n):
        raise EncodingError(
            f"weight {weight:.4g} needs {wq.bit_length()} bits with {f} fractional bits; "
            f"field holds {weight_field_bits(n)}. Use a larger epsilon or c_s (coarser sampling)"
        )
    return wq


@dataclass(frozen=True)
class CutSparsifier:
    n: int
    edges: tuple[tuple[int, int], ...]  # kept (u, v) node handles
    weight: float  # 1/q for every kept edge
    q: float
    eps: float
    m_origin: int

    @property
    def m(self) -> int:
        return len(self.edges)

    def quantized_weight(self) -> int:
        return quantize(self.weight, self.n)

    def cut(self, side: Iterable[int]) -> float:
        s = set(side)
        return self.weight * sum((u in s) != (v in s) for u, v in self.edges)


def uniform_cut_sparsifier(g: Graph, eps: float, c_s: float = DEFAULT_CS, lam: int = 1, seed: int = 0) -> CutSparsifier:
    if not 0 < eps < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if lam < 1:
        raise ValueError("lam must be >= 1")
    if g.weighted:
        raise ValueError("uniform sampling expects an unweighted graph")
    q = sample_probability(g.n, eps, c_s, lam)
    keep = np.random.default_rng(seed).random(g.m) < q
    edges = tuple((u, v) for (u, v, _), k in zip(g.edges, keep.tolist()) if k)
    return CutSparsifier(g.n, edges, 1.0 / q, q, eps, g.m)


def side_matrix(n: int, query_sets: Sequence[Iterable[int]]) -> np.ndarray:
    mat = np.zeros((len(query_sets), n), dtype=bool)
    for i, s in enumerate(query_sets):
        mat[i, list(s)] = True
    return mat


def local_cut_estimates(n: int, held: Iterable[tuple[int, int, int]], handle: dict[int, int], sides: np.ndarray) -> np.ndarray:
    """Evaluate every query side against one node's copy of the sparsifier."""
    held = list(held)
    f = frac_bits(n)
    if not held or not len(sides):
        return np.zeros(len(sides))
    a = np.array([handle[x] for x, _, _ in held])
    b = np.array([handle[y] for _, y, _ in held])
    w = np.array([wq for _, _, wq in held], dtype=np.float64) / (1 << f)
    crossing = sides[:, a] != sides[:, b]
    return crossing @ w


@dataclass
class CutAnswer:
    side: frozenset[int]
    estimate: float
    truth: int | None = None

    @property
    def relative_error(self) -> float | None:
        if self.truth is None or self.truth == 0:
            return None
        return abs(self.estimate - self.truth) / self.truth


@dataclass
class CutResult:
    answers: list[CutAnswer]
    report: RunReport
    agree: bool  # every node produced identical estimates
    estimates: np.ndarray = field(default_factory=lambda: np.zeros(0))


def broadcast_and_estimate_cuts(
    g: Graph,
    sp: CutSparsifier,
    packing: TreePacking,
    query_sets: Sequence[Iterable[int]],
    seed: int = 0,
    lam: int | None = None,
) -> CutResult:
    ids = g.node_ids
    handle = {x: v for v, x in enumerate(ids)}
    wq = sp.quantized_weight() if sp.m else 0
    # the lower-id endpoint holds each sampled edge
    inst = BroadcastInstance([(u if ids[u] < ids[v] else v, (ids[u], ids[v], wq)) for u, v in sp.edges])
    bc = k_broadcast(g, inst, packing, seed, lam=lam)
    sides = side_matrix(g.n, query_sets)

    # every node answers from its own copy; identical copies give identical answers
    by_copy: dict[frozenset, np.ndarray] = {}
    per_node = []
    for v in range(g.n):
        copy = frozenset(bc.received[v].values())
        est = by_copy.get(copy)
        if est is None:
            est = local_cut_estimates(g.n, copy, handle, sides)
            by_copy[copy] = est
        per_node.append(est)
    agree = all(np.array_equal(per_node[0], e) for e in per_node[1:])
    ref = per_node[0] if per_node else np.zeros(len(sides))
    exact = g.n <= MAX_CUT_ENUM_N
    answers = [
        CutAnswer(frozenset(s), float(e), cut_value(g, s) if exact else None)
        for s, e in zip(query_sets, ref.tolist())
    ]
    report = bc.report
    report.extra.update(sparsifier_edges=sp.m, q=sp.q, quantized_weight=wq, answers_agree=agree)
    return CutResult(answers, report, agree, ref)
