import math

import numpy as np
import pytest

from cqa_rank import clustering
from cqa_rank.embeddings import EmbeddingModel, Vocabulary
from cqa_rank.exceptions import ConfigError, FormatError


def toy_model(points):
    words = [f"w{i}" for i in range(len(points))]
    return EmbeddingModel(Vocabulary(words, {word: 1 for word in words}, 1), np.asarray(points, dtype=np.float32))


def test_lloyd_distinct_points():
    points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
    centroids, labels, history = clustering.lloyd(points, 4, seed=3)
    assert sorted(labels.tolist()) == [0, 1, 2, 3]
    assert history[-1] == pytest.approx(0.0)


def test_lloyd_blobs():
    rng = np.random.default_rng(11)
    points = np.concatenate([rng.normal(0.0, 1.0, (10, 2)), rng.normal(100.0, 1.0, (10, 2))])
    _, labels, history = clustering.lloyd(points, 2, seed=1)
    assert len(set(labels[:10])) == 1
    assert len(set(labels[10:])) == 1
    assert labels[0] != labels[10]
    assert all(later <= earlier + 1e-9 for earlier, later in zip(history, history[1:]))


def test_lloyd_inertia_never_increases():
    rng = np.random.default_rng(5)
    for seed in range(100):
        n = int(rng.integers(5, 40))
        points = rng.normal(size=(n, int(rng.integers(1, 5)))) * rng.uniform(0.1, 10.0)
        k = int(rng.integers(1, min(6, n) + 1))
        _, labels, history = clustering.lloyd(points, k, max_iters=50, seed=seed)
        assert history
        assert all(later <= earlier + 1e-9 * max(1.0, earlier) for earlier, later in zip(history, history[1:]))
        assert len(labels) == n


def partition_inertia(points, mask):
    inertia = 0.0
    for part in (points[mask], points[~mask]):
        if len(part):
            inertia += float(np.sum((part - part.mean(axis=0)) ** 2))
    return inertia


def optimal_two_partition(points):
    """Exhaustive search over all splits; point 0 always in the first part."""
    n = len(points)
    best_mask, best_inertia = None, math.inf
    for bits in range(2 ** (n - 1)):
        mask = np.array([True] + [bool(bits >> i & 1) for i in range(n - 1)])
        if mask.all():
            continue
        inertia = partition_inertia(points, mask)
        if inertia < best_inertia:
            best_mask, best_inertia = mask, inertia
    return best_mask, best_inertia


def test_lloyd_recovers_separated_blobs():
    # blob centers are 10 times the blob width apart
    for seed in range(10):
        rng = np.random.default_rng(seed)
        direction = rng.normal(size=2)
        direction /= np.linalg.norm(direction)
        points = np.concatenate([rng.uniform(-0.5, 0.5, (6, 2)), rng.uniform(-0.5, 0.5, (6, 2)) + 10.0 * direction])
        truth = np.array([True] * 6 + [False] * 6)
        best_mask, best_inertia = optimal_two_partition(points)
        assert np.array_equal(best_mask, truth)

        _, labels, _ = clustering.lloyd(points, 2, seed=seed)
        mask = labels == labels[0]
        assert np.array_equal(mask, truth)
        assert partition_inertia(points, mask) == pytest.approx(best_inertia)


def test_lloyd_single_cluster():
    rng = np.random.default_rng(2)
    points = rng.normal(size=(15, 3))
    centroids, labels, _ = clustering.lloyd(points, 1)
    assert np.allclose(centroids[0], points.mean(axis=0))
    assert set(labels.tolist()) == {0}


def test_lloyd_permutation_invariant():
    rng = np.random.default_rng(4)
    points = rng.normal(size=(30, 2))
    _, labels, _ = clustering.lloyd(points, 3, seed=9)
    permutation = rng.permutation(30)
    _, permuted, _ = clustering.lloyd(points[permutation], 3, seed=9)
    assert np.array_equal(permuted, labels[permutation])


def test_kmeans():
    model = toy_model([[0.0, 0.0], [0.1, 0.0], [9.0, 9.0], [9.1, 9.0]])
    result = clustering.kmeans(model, 2, seed=1)
    assert set(result.assignment) == {"w0", "w1", "w2", "w3"}
    assert result.assignment["w0"] == result.assignment["w1"]
    assert result.assignment["w2"] == result.assignment["w3"]
    assert result.assignment["w0"] != result.assignment["w2"]
    assert result.inertia_history
    with pytest.raises(ConfigError):
        clustering.kmeans(model, 5)


def test_cluster_bag():
    model = clustering.ClusterModel(8, np.zeros((8, 2)), {"a": 0, "b": 7})
    assert clustering.cluster_bag(["a", "a", "b", "x"], model) == {0: 2, 7: 1}
    assert clustering.cluster_bag(["x", "y"], model) == {}


@pytest.mark.parametrize("bag_q, bag_c, expected", [
    ({0: 2}, {0: 1}, 1.0),
    ({0: 1}, {1: 1}, 0.0),
    ({0: 1, 1: 1}, {0: 1}, 1 / math.sqrt(2)),
    ({0: 3, 4: 1}, {0: 3, 4: 1}, 1.0),
    ({}, {0: 1}, 0.0),
])
def test_cluster_similarity(bag_q, bag_c, expected):
    assert clustering.cluster_similarity(bag_q, bag_c) == pytest.approx(expected)


def test_cluster_file(tmp_path):
    model = toy_model([[0.0, 0.0], [2.0, 0.0], [9.0, 9.0]])
    clusters = clustering.ClusterModel(2, np.zeros((2, 2)), {"w0": 0, "w1": 0, "w2": 1})
    path = str(tmp_path / "clusters.txt")
    clustering.save_clusters(clusters, path)
    loaded = clustering.load_clusters(path, model)
    assert loaded.k == 2
    assert loaded.assignment == clusters.assignment
    assert loaded.centroids.tolist() == [[1.0, 0.0], [9.0, 9.0]]


def test_cluster_file_errors(tmp_path):
    path = tmp_path / "clusters.txt"
    path.write_text("2 2\nw0\t5\n")
    with pytest.raises(FormatError):
        clustering.load_clusters(str(path))
    path.write_text("two\n")
    with pytest.raises(FormatError):
        clustering.load_clusters(str(path))
