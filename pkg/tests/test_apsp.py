import numpy as np
import pytest

from edgecast.apsp import (
    ClusterAssignment,
    CoverageError,
    center_probability,
    cluster_apsp,
    estimate_unweighted_apsp,
    sample_clusters,
    worst_approximation,
)
from edgecast.graph import (
    complete,
    hypercube,
    oracle_apsp,
    path,
    random_regular,
    star,
    with_random_ids,
    with_random_weights,
)


def sampled(g, c, seed):
    for attempt in range(20):
        try:
            return sample_clusters(g, c, seed=1000 * attempt + seed)[0]
        except CoverageError:
            pass
    raise AssertionError("no covering sample")


def check_gc(g, clus, seed=0):
    """Simulated cluster-graph distances against a centralized BFS."""
    res = cluster_apsp(g, clus, seed)
    centers, gc = clus.cluster_graph(g)
    d = oracle_apsp(gc)
    for i, a in enumerate(centers):
        for j, b in enumerate(centers):
            assert res.dist[a][b] == d[i, j]
    assert res.collisions == 0
    return res


def test_probability_clamps_to_one():
    assert center_probability(complete(3), 3.0) == 1.0
    assert center_probability(random_regular(256, 32, seed=1), 3.0) < 1.0


def test_all_centers_when_p_is_one():
    g = complete(3)
    clus, rounds = sample_clusters(g, 3.0, seed=0)
    assert clus.centers == (0, 1, 2) and clus.s == [0, 1, 2] and rounds == 1


def test_triangle_single_center():
    g = complete(3)
    clus = ClusterAssignment((0,), [0, 0, 0], 1.0)
    res = check_gc(g, clus)
    assert res.dist == {0: {0: 0}}


def test_path_center_in_the_middle():
    g = path(3)
    clus = ClusterAssignment((1,), [1, 1, 1], 1.0)
    _, gc = clus.cluster_graph(g)
    assert gc.n == 1 and gc.m == 0
    assert check_gc(g, clus).dist[1] == {1: 0}


def test_star_leaves_choose_center():
    g = star(4)
    clus = ClusterAssignment((0, 3), [0, 0, 0, 3, 0], 1.0)
    res = check_gc(g, clus)
    assert res.dist[0][3] == 1


def test_members_pick_min_id_center():
    g = with_random_ids(random_regular(60, 12, seed=2), seed=3)
    clus, _ = sample_clusters(g, 3.0, seed=5)
    cen = set(clus.centers)
    for v in range(g.n):
        if v in cen:
            assert clus.s[v] == v
        else:
            cands = [u for u in g.neighbors(v) if u in cen]
            assert clus.s[v] == min(cands, key=g.node_ids.__getitem__)


def test_uncovered_node_raises():
    g = path(6)
    hits = 0
    for s in range(30):
        try:
            sample_clusters(g, 0.2, seed=s)
        except CoverageError as exc:
            hits += 1
            assert 0 <= exc.node < g.n
    assert hits > 0


def test_pipeline_gives_up_after_retries():
    g = path(6)
    with pytest.raises(CoverageError):
        for s in range(30):
            estimate_unweighted_apsp(g, c=0.05, seed=s, retries=0)


@pytest.mark.parametrize("seed", range(4))
def test_cluster_graph_matches_oracle(seed):
    g = with_random_ids(random_regular(96, 12, seed=seed), seed=seed)
    clus = sampled(g, 1.0, seed)
    assert 1 < len(clus.centers) < g.n
    res = check_gc(g, clus, seed)
    # cluster hops never exceed graph hops between centers
    d = oracle_apsp(g)
    for a in clus.centers:
        for b in clus.centers:
            assert res.dist[a][b] <= d[a, b]


def test_hypercube_cluster_graph():
    g = hypercube(6)
    clus = sampled(g, 1.0, 4)
    check_gc(g, clus, 4)


@pytest.mark.parametrize("seed", range(3))
def test_sandwich(seed):
    g = random_regular(128, 24, seed=seed)
    est, rep = estimate_unweighted_apsp(g, seed=seed)
    d = oracle_apsp(g)
    assert rep.correctness
    assert (est.table >= d).all() and (est.table <= 3 * d + 2).all()
    # same-cluster pairs, the diagonal included, get exactly 2
    same = np.equal.outer(est.s, est.s)
    assert (est.table[same] == 2).all() and (np.diag(est.table) == 2).all()
    assert rep.extra["collisions"] == 0


def test_sandwich_with_random_ids():
    g = with_random_ids(random_regular(64, 16, seed=9), seed=1)
    est, _ = estimate_unweighted_apsp(g, seed=2)
    d = oracle_apsp(g)
    assert (est.table >= d).all() and (est.table <= 3 * d + 2).all()


def test_stage_accounting():
    g = random_regular(64, 16, seed=4)
    _, rep = estimate_unweighted_apsp(g, seed=0)
    assert rep.rounds_used == sum(rep.stages.values())
    assert {"packing", "clustering", "dfs", "bfs", "rows", "broadcast_broadcast"} <= set(rep.stages)


def test_rejects_weighted():
    with pytest.raises(ValueError):
        estimate_unweighted_apsp(with_random_weights(complete(5), 4, seed=0))


def test_worst_approximation():
    exact = np.array([[0, 1], [1, 0]])
    est = np.array([[0, 5], [4, 0]])
    assert worst_approximation(est, exact, 3) == (5.0, 2.0)
