import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inflation_dynamics.distance import (
    DistanceMatrix,
    cut_clusters,
    hierarchical_cluster,
    read_distance_csv,
    trajectory_distance_matrix,
    write_dendrogram_json,
    write_distance_csv,
)
from inflation_dynamics.errors import DataError
from inflation_dynamics.panel import NormalizedTrajectory
from oracles import l1_distance_loops, naive_agglomerative


def traj(name, values):
    return NormalizedTrajectory(name, np.asarray(values, float))


def random_trajectories(rng, n, length=30):
    out = []
    for k in range(n):
        x = rng.normal(size=length)
        out.append(traj(f"E{k}", x / np.abs(x).sum()))
    return out


def random_distance(rng, n):
    pts = rng.normal(size=(n, 3))
    return DistanceMatrix(tuple(f"P{k}" for k in range(n)), np.abs(pts[:, None] - pts[None]).sum(-1))


def two_pairs():
    d = np.full((4, 4), 10.0)
    d[0, 1] = d[1, 0] = d[2, 3] = d[3, 2] = 1.0
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(("a", "b", "c", "d"), d)


def test_identical_trajectories_are_zero_distance():
    t = [0.25, -0.25, 0.5]
    assert trajectory_distance_matrix([traj("x", t), traj("y", t)]).d[0, 1] == 0.0


def test_simple_distance():
    d = trajectory_distance_matrix([traj("x", [0.5, 0.5]), traj("y", [0.5, -0.5])])
    assert d.d[0, 1] == 1.0 and d.d[1, 0] == 1.0


def test_distance_matches_loop_oracle():
    ts = random_trajectories(np.random.default_rng(0), 3)
    d = trajectory_distance_matrix(ts)
    np.testing.assert_allclose(d.d, l1_distance_loops([t.values for t in ts]), rtol=0, atol=1e-13)


def test_length_mismatch():
    with pytest.raises(DataError, match="lengths differ"):
        trajectory_distance_matrix([traj("x", [1.0]), traj("y", [0.5, 0.5])])


def test_triangle_inequality_sampled():
    rng = np.random.default_rng(1)
    d = trajectory_distance_matrix(random_trajectories(rng, 12)).d
    for _ in range(200):
        i, j, k = rng.integers(0, 12, size=3)
        assert d[i, k] <= d[i, j] + d[j, k] + 1e-12


def test_distance_matrix_validation():
    with pytest.raises(DataError):
        DistanceMatrix(("a", "b"), [[0, 1], [2, 0]])
    with pytest.raises(DataError):
        DistanceMatrix(("a", "b"), [[1, 1], [1, 0]])
    with pytest.raises(DataError):
        DistanceMatrix(("a", "b"), [[0, -1], [-1, 0]])


def test_two_entities_single_merge():
    d = DistanceMatrix(("a", "b"), [[0, 3.5], [3.5, 0]])
    dendro = hierarchical_cluster(d)
    assert len(dendro.merges) == 1
    assert dendro.merges[0].height == 3.5 and dendro.merges[0].size == 2


def test_two_pairs_merge_order_and_cut():
    dendro = hierarchical_cluster(two_pairs(), "average")
    heights = [m.height for m in dendro.merges]
    assert heights == [1.0, 1.0, 10.0]
    assert (dendro.merges[0].left, dendro.merges[0].right) == (0, 1)
    assert cut_clusters(dendro, 2) == [["a", "b"], ["c", "d"]]
    assert cut_clusters(dendro, 1) == [["a", "b", "c", "d"]]
    assert cut_clusters(dendro, 4) == [["a"], ["b"], ["c"], ["d"]]
    with pytest.raises(ValueError):
        cut_clusters(dendro, 5)
    with pytest.raises(ValueError):
        cut_clusters(dendro, 0)


@pytest.mark.parametrize("linkage", ["average", "single", "complete"])
@pytest.mark.parametrize("seed", range(5))
def test_merges_match_naive_oracle(linkage, seed):
    dist = random_distance(np.random.default_rng(seed), 6)
    got = hierarchical_cluster(dist, linkage).merges
    want = naive_agglomerative(dist.d, linkage)
    assert [(m.left, m.right, m.size) for m in got] == [(a, b, s) for a, b, _, s in want]
    np.testing.assert_allclose([m.height for m in got], [h for _, _, h, _ in want], rtol=1e-12)
    heights = [m.height for m in got]
    assert all(b >= a - 1e-12 for a, b in zip(heights, heights[1:]))


def _partition(dendro, k):
    return sorted(tuple(sorted(g)) for g in cut_clusters(dendro, k))


@pytest.mark.parametrize("seed", range(4))
def test_permutation_gives_isomorphic_dendrogram(seed):
    rng = np.random.default_rng(seed)
    dist = random_distance(rng, 7)
    perm = rng.permutation(7)
    a = hierarchical_cluster(dist)
    b = hierarchical_cluster(dist.permuted(perm))
    np.testing.assert_allclose([m.height for m in a.merges], [m.height for m in b.merges], rtol=1e-12)
    for k in range(1, 8):
        assert _partition(a, k) == _partition(b, k)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100))
def test_average_heights_scale(seed, c):
    dist = random_distance(np.random.default_rng(seed), 5)
    scaled = DistanceMatrix(dist.entities, c * dist.d)
    h1 = [m.height for m in hierarchical_cluster(dist).merges]
    h2 = [m.height for m in hierarchical_cluster(scaled).merges]
    np.testing.assert_allclose(h2, c * np.array(h1), rtol=1e-10)


def test_leaf_order_covers_all_leaves():
    dendro = hierarchical_cluster(two_pairs())
    assert sorted(dendro.leaf_order) == [0, 1, 2, 3]
    assert dendro.leaf_order[:2] in ([0, 1], [1, 0])


def test_csv_and_json_outputs(tmp_path):
    dist = two_pairs()
    write_distance_csv(dist, tmp_path / "d.csv")
    back = read_distance_csv(tmp_path / "d.csv")
    assert back.entities == dist.entities
    np.testing.assert_array_equal(back.d, dist.d)
    write_dendrogram_json(hierarchical_cluster(dist), tmp_path / "t.json")
    js = json.loads((tmp_path / "t.json").read_text())
    assert [set(m) for m in js["merges"]] == [{"left", "right", "height", "size"}] * 3
    assert js["merges"][-1]["height"] == 10.0
