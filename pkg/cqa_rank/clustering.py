"""K-means word clusters over an embedding vocabulary and cluster-bag similarity.

Cluster file format: header "k dim", then one "word<TAB>cluster_id" line per word.
"""

import concurrent.futures
import logging
import math
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .embeddings import EmbeddingModel
from .exceptions import ConfigError, FormatError, NumericalError

__all__ = [
    "ClusterModel",
    "lloyd",
    "kmeans",
    "cluster_bag",
    "cluster_similarity",
    "save_clusters",
    "load_clusters",
]

logger = logging.getLogger(__name__)

DefaultClusters: int = 1000

InertiaTolerance: float = 1e-9
"""Relative slack allowed when asserting non-increasing inertia."""

ChunkSize: int = 4096

ClusterBag = Dict[int, int]


class ClusterModel:
    """Partition of an embedding vocabulary into k clusters."""

    def __init__(self, k: int, centroids: np.ndarray, assignment: Dict[str, int],
                 inertia_history: Optional[List[float]] = None) -> None:
        self.k = k
        self.centroids = centroids
        self.assignment = assignment
        self.inertia_history = inertia_history or []

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])

    def __repr__(self) -> str:
        return f"ClusterModel(k={self.k}, words={len(self.assignment)})"


def _nearest(points: np.ndarray, centroids: np.ndarray, workers: int = 1) -> np.ndarray:
    """Index of nearest centroid per point (lowest index wins ties)."""
    sq_centroids = np.einsum("ij,ij->i", centroids, centroids)

    def assign(chunk: np.ndarray) -> np.ndarray:
        # |x - c|^2 up to the per-point constant |x|^2
        return np.argmin(sq_centroids[None, :] - 2.0 * chunk @ centroids.T, axis=1)

    chunks = [points[i:i + ChunkSize] for i in range(0, len(points), ChunkSize)] or [points]
    if workers > 1 and len(chunks) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            return np.concatenate(list(executor.map(assign, chunks)))
    return np.concatenate([assign(chunk) for chunk in chunks])


def _squared_distances(points: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> np.ndarray:
    diff = points - centroids[labels]
    return np.einsum("ij,ij->i", diff, diff)


def _kmeans_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    chosen = [int(rng.integers(n))]
    closest = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = float(np.sum(closest))
        if total > 0.0:
            candidate = int(rng.choice(n, p=closest / total))
        else:
            candidate = int(rng.integers(n))
        chosen.append(candidate)
        closest = np.minimum(closest, np.sum((points - points[candidate]) ** 2, axis=1))
    return points[chosen].copy()


def lloyd(points: np.ndarray, k: int, max_iters: int = 100, seed: int = 1,
          workers: int = 1) -> Tuple[np.ndarray, np.ndarray, List[float]]:
    """Lloyd iterations from k-means++ initialization.

    Returns (centroids, labels, inertia per iteration). Points are processed
    in a canonical (lexicographic) order so that permuting the input never
    changes the resulting partition.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if not 1 <= k <= n:
        raise ConfigError(f"number of clusters k={k} must be within 1..{n}")
    order = np.lexsort(points.T[::-1]) if points.shape[1] else np.arange(n)
    data = points[order]

    rng = np.random.default_rng(seed)
    centroids = _kmeans_plusplus(data, k, rng)
    labels: Optional[np.ndarray] = None
    history: List[float] = []

    for iteration in range(max_iters):
        new_labels = _nearest(data, centroids, workers)
        inertia = float(np.sum(_squared_distances(data, centroids, new_labels)))
        if history and inertia > history[-1] + InertiaTolerance * max(1.0, history[-1]):
            raise NumericalError(f"k-means inertia increased at iteration {iteration}: {history[-1]} -> {inertia}")
        history.append(inertia)
        logger.debug("k-means iteration %d: inertia=%.6f", iteration + 1, inertia)
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels

        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, data)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]

        empty = np.flatnonzero(~nonempty)
        if len(empty):
            distances = _squared_distances(data, centroids, labels)
            for cluster, point in zip(empty, np.argsort(-distances, kind="stable")):
                logger.debug("reseeding empty cluster %d with point %d", cluster, point)
                centroids[cluster] = data[point]

    if labels is None:
        labels = _nearest(data, centroids, workers)
    result = np.empty(n, dtype=np.int64)
    result[order] = labels
    return centroids, result, history


def kmeans(model: EmbeddingModel, k: int = DefaultClusters, max_iters: int = 100, seed: int = 1,
           workers: int = 1) -> ClusterModel:
    """Cluster all word vectors of an embedding model."""
    if k > len(model):
        raise ConfigError(f"number of clusters k={k} exceeds vocabulary size {len(model)}")
    logger.info("clustering %d word vectors into %d clusters ...", len(model), k)
    centroids, labels, history = lloyd(model.input_vectors, k, max_iters, seed, workers)
    if not np.all(np.isfinite(centroids)):
        raise NumericalError("cluster centroids contain non-finite values")
    logger.info("k-means finished after %d iteration(s), inertia=%.6f", len(history), history[-1] if history else 0.0)
    assignment = {word: int(label) for word, label in zip(model.vocabulary.words, labels)}
    return ClusterModel(k, centroids, assignment, history)


def cluster_bag(tokens: Iterable[str], model: ClusterModel) -> ClusterBag:
    """Count tokens per cluster, skipping unknown words."""
    bag: ClusterBag = {}
    for token in tokens:
        cluster = model.assignment.get(token)
        if cluster is not None:
            bag[cluster] = bag.get(cluster, 0) + 1
    return bag


def cluster_similarity(bag_q: ClusterBag, bag_c: ClusterBag) -> float:
    """Cosine similarity of sparse cluster count vectors, 0 if either is empty."""
    if not bag_q or not bag_c:
        return 0.0
    dot = sum(count * bag_c.get(cluster, 0) for cluster, count in bag_q.items())
    norm_q = math.sqrt(sum(count * count for count in bag_q.values()))
    norm_c = math.sqrt(sum(count * count for count in bag_c.values()))
    return dot / (norm_q * norm_c)


def save_clusters(model: ClusterModel, path: str) -> None:
    with open(path, "wt", encoding="utf-8") as fp:
        fp.write(f"{model.k} {model.dim}\n")
        for word, cluster in model.assignment.items():
            fp.write(f"{word}\t{cluster}\n")


def load_clusters(path: str, embeddings: Optional[EmbeddingModel] = None) -> ClusterModel:
    """Read cluster file; centroids are recomputed when *embeddings* are given."""
    with open(path, "rt", encoding="utf-8") as fp:
        header = fp.readline().split()
        if len(header) != 2 or not all(part.isdigit() for part in header):
            raise FormatError(f"{path}: invalid header, expected 'k dim'")
        k, dim = int(header[0]), int(header[1])
        assignment: Dict[str, int] = {}
        for lineno, line in enumerate(fp, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2 or not parts[1].isdigit() or not 0 <= int(parts[1]) < k:
                raise FormatError(f"{path}:{lineno}: invalid cluster assignment {line.strip()!r}")
            assignment[parts[0]] = int(parts[1])
    centroids = np.zeros((k, dim), dtype=np.float64)
    if embeddings is not None:
        if embeddings.dim != dim:
            raise FormatError(f"cluster dim {dim} does not match embedding dim {embeddings.dim}")
        counts = np.zeros(k)
        for word, cluster in assignment.items():
            if word in embeddings:
                centroids[cluster] += embeddings[word]
                counts[cluster] += 1
        nonempty = counts > 0
        centroids[nonempty] /= counts[nonempty, None]
    return ClusterModel(k, centroids, assignment)
