import math

import pytest
from hypothesis import given, settings, strategies as st

from edgecast.graph import (
    complete,
    cycle,
    eccentricity,
    exact_diameter,
    exact_edge_connectivity,
    hypercube,
    is_connected,
    path,
    random_regular,
    star,
    with_random_ids,
)
from edgecast.packing import (
    PackingError,
    PartitionError,
    build_trees,
    edge_part,
    exponential_search,
    from_parts,
    local_partition,
    num_parts,
    partition,
    sample_subgraph,
    single_tree,
    tree_diameter,
    verify_packing,
)


def parts_of(g, pairs_per_part):
    return from_parts(g, [[g.edge_id(u, v) for u, v in pp] for pp in pairs_per_part])


# ---- sampling


def test_sample_all_edges():
    g = random_regular(20, 4, seed=1)
    assert sample_subgraph(g, 1.0, seed=3) == g


def test_sample_rejects_bad_probability():
    with pytest.raises(ValueError):
        sample_subgraph(path(3), 0.0)


def test_single_edge_sampling_is_binomial():
    g = path(2)
    kept = sum(sample_subgraph(g, 0.5, seed=s).m for s in range(1000))
    # sd = sqrt(1000 / 4) ~ 15.8, so +-50 is a 3.2 sigma window
    assert 450 <= kept <= 550


def test_sampled_k64_has_small_diameter():
    g = complete(64)
    n, lam, C = 64, 63, 2.0
    p = C * math.log(n) / lam
    bound = 20 * n * math.ceil(C * math.log(n)) / g.min_degree
    good = 0
    for s in range(100):
        h = sample_subgraph(g, p, seed=s)
        good += is_connected(h) and exact_diameter(h) <= bound
    assert good >= 99


# ---- partition


def test_part_count_formula():
    assert num_parts(3, 8, 2.0) == 1
    assert num_parts(7, 8, 2.0) == 1
    # 255 / (2 ln 256) = 255 / 11.0904 = 22.99
    assert num_parts(255, 256, 2.0) == 22
    assert num_parts(1, 1000, 2.0) == 1


def test_one_part_holds_everything():
    g = hypercube(4)
    part = partition(g, 2, 2.0, seed=1)
    assert part.count == 1 and sorted(part.parts[0]) == list(range(g.m))


def test_k4_two_parts_cover_disjointly():
    g = complete(4)
    part = partition(g, 6, 1.0 / math.log(4) / 2, seed=4)  # floor(6 * 2 / 4 ...) forces >= 2 parts
    assert part.count >= 2
    flat = sorted(e for p in part.parts for e in p)
    assert flat == list(range(6))


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 30), st.integers(1, 60), st.integers(0, 2**32))
def test_partition_is_exhaustive_and_disjoint(n, lam, seed):
    g = complete(n)
    part = partition(g, lam, 0.5, seed)
    flat = sorted(e for p in part.parts for e in p)
    assert flat == list(range(g.m))
    assert all(part.part_of[e] == i for i, p in enumerate(part.parts) for e in p)


def test_partition_is_deterministic():
    g = random_regular(30, 6, seed=2)
    assert partition(g, 30, 1.0, seed=9) == partition(g, 30, 1.0, seed=9)


def test_endpoints_agree_without_communication():
    g = with_random_ids(random_regular(40, 8, seed=5), seed=6)
    for seed in range(5):
        views = local_partition(g, 40, 1.0, seed)
        central = partition(g, 40, 1.0, seed)
        for eid, (u, v, _) in enumerate(g.edges):
            assert views[u][v] == views[v][u] == central.part_of[eid]


def test_edge_part_symmetric():
    assert edge_part(7, 3, 11, 5) == edge_part(7, 11, 3, 5)


def test_from_parts_rejects_duplicates_and_gaps():
    g = complete(4)
    with pytest.raises(PartitionError):
        from_parts(g, [[0, 1, 2], [2, 3, 4, 5]])
    with pytest.raises(PartitionError):
        from_parts(g, [[0, 1, 2], [3, 4]])


# ---- verification


def test_verify_whole_k8():
    g = complete(8)
    (check,) = verify_packing(g, from_parts(g, [range(g.m)]), 20)
    assert check.connected and check.diameter == 1 and check.within_bound


def test_path_cannot_split_into_two_spanning_parts():
    g = path(5)
    checks = verify_packing(g, from_parts(g, [[0, 2], [1, 3]]), 20)
    assert not all(c.connected for c in checks)


# ---- trees


def test_star_tree():
    g = star(4)
    pk = single_tree(g)
    t = pk.trees[0]
    assert t.root == 0 and t.height == 1
    assert all(t.parent[v] == 0 for v in range(1, 5))
    assert pk.rounds <= 3


def test_k4_two_hamiltonian_paths():
    g = complete(4)
    part = parts_of(g, [[(0, 1), (1, 2), (2, 3)], [(1, 3), (0, 3), (0, 2)]])
    pk = build_trees(g, part)
    assert len(pk.trees) == 2
    assert [t.tree_diameter for t in pk.trees] == [3, 3]
    for t, p in zip(pk.trees, part.parts):
        tree_edges = {g.edge_id(v, t.parent[v]) for v in range(4) if t.parent[v] is not None}
        assert tree_edges == set(p)


def test_cycle_tree():
    g = cycle(6)
    t = single_tree(g).trees[0]
    assert t.tree_diameter <= 5 and t.subgraph_diameter == 3


def test_disconnected_part_is_named():
    g = path(5)
    with pytest.raises(PackingError, match="part 1"):
        build_trees(g, from_parts(g, [[0, 1, 2, 3], []]))


@pytest.mark.parametrize("seed", range(3))
def test_tree_packing_properties(seed):
    g = random_regular(128, 40, seed=seed)
    part = exponential_search(g, 2.0, 20.0, seed=seed).partition
    pk = build_trees(g, part, seed)
    assert len(pk.trees) == part.count >= 2
    for t, eids in zip(pk.trees, part.parts):
        sub = g.subgraph(eids)
        own = set(eids)
        for v in range(g.n):
            if t.parent[v] is not None:
                assert g.edge_id(v, t.parent[v]) in own
        assert t.depth[v] is not None
        assert t.tree_diameter <= 2 * eccentricity(sub, t.root)
        assert t.tree_diameter == tree_diameter(t.parent)
    assert pk.rounds <= 2 * pk.max_subgraph_diameter + 2


# ---- exponential search


def test_search_k8_single_part():
    found = exponential_search(complete(8))
    assert found.partition.count == 1 and found.guesses == 1


def test_search_path_single_part():
    found = exponential_search(path(6))
    assert found.partition.count == 1


def test_search_guess_count_bounded():
    g = random_regular(64, 12, seed=1)
    found = exponential_search(g, 2.0, 20.0, seed=2)
    assert found.guesses <= math.ceil(math.log2(g.min_degree)) + 1


def test_search_within_factor_four_of_connectivity():
    g = random_regular(512, 64, seed=11)
    lam = exact_edge_connectivity(g)
    ok = 0
    for s in range(100):
        found = exponential_search(g, 2.0, 20.0, seed=s)
        ok += lam / 4 <= found.lam_guess <= lam * 4
    assert ok >= 90


@pytest.mark.parametrize("seed", range(4))
def test_certificate_matches_exact_verdict(seed):
    g = random_regular(60, 6, seed=seed)
    for lam, C, bc in [(6, 0.5, 20.0), (6, 1.0, 20.0), (6, 0.5, 0.3)]:
        part = partition(g, lam, C, seed)
        fast = verify_packing(g, part, bc, exact=False)
        slow = verify_packing(g, part, bc)
        for f, s in zip(fast, slow):
            assert (f.connected, f.within_bound) == (s.connected, s.within_bound)
            assert f.diameter >= s.diameter
