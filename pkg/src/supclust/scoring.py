"""Sample-level acquisition signals: typicality and SUP.

Typicality of a sample is the inverse mean Euclidean distance to its K
nearest neighbors. SUP is the inverse softmax-weighted mean distance to
the centers of all other clusters; the weights depend only on the
inter-center distances and a temperature, so samples closest to the
(weighted) inter-cluster boundary score highest.

Degenerate distances are clamped: whenever a mean distance or weighted sum
falls below 1e-12 the score saturates at 1e12 instead of overflowing.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import EmbeddingSet
from .validation import as_float_matrix, check_index_list

MIN_DISTANCE = 1e-12
MAX_SCORE = 1e12

DEFAULT_TEMPERATURE = 1.0
DEFAULT_TYPICALITY_K = 20


@dataclass(frozen=True)
class ScoreVector:
    """Per-sample scores aligned with their global sample indices."""

    values: np.ndarray
    subject_indices: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        subjects = np.asarray(self.subject_indices, dtype=np.int64)
        if values.shape != subjects.shape or values.ndim != 1:
            raise ValueError("values and subject_indices must be matching 1-D vectors")
        if not np.isfinite(values).all() or (values <= 0).any():
            raise ValueError("scores must be finite and positive")
        if np.unique(subjects).size != subjects.size:
            raise ValueError("subject_indices must be distinct")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "subject_indices", subjects)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ClusterWeights:
    """Softmax weights from one cluster to every other cluster."""

    source_cluster: int
    weights: dict[int, float]
    temperature: float

    def __post_init__(self):
        if not self.weights:
            raise ValueError("weights must cover at least one other cluster")
        if self.source_cluster in self.weights:
            raise ValueError("weights must not include the source cluster")
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {total}, expected 1 within 1e-9")
        if any(w <= 0 for w in self.weights.values()):
            raise ValueError("every weight must be positive")

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(cluster ids ascending, matching weights)."""
        ids = np.array(sorted(self.weights), dtype=np.int64)
        return ids, np.array([self.weights[int(j)] for j in ids], dtype=np.float64)


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, EmbeddingSet):
        return data.embeddings
    return as_float_matrix(data, "data")


def typicality(data, subject_indices, neighbor_pool, k: int) -> ScoreVector:
    """Inverse mean distance to the K nearest neighbors within a pool.

    Neighbors are drawn from ``neighbor_pool`` excluding the subject
    itself; distance ties at the K-th neighbor are broken by ascending
    sample index. Requires ``k <= len(pool) - 1`` for subjects that belong
    to the pool (a point is never its own neighbor).
    """
    X = _as_matrix(data)
    n = X.shape[0]
    subjects = check_index_list(subject_indices, n, "subject_indices")
    pool = check_index_list(neighbor_pool, n, "neighbor_pool")
    if k < 1:
        raise ValueError("k must be >= 1")
    if pool.size == 0:
        raise ValueError("neighbor_pool must not be empty")

    pool = np.sort(pool)
    pool_set = set(int(i) for i in pool)
    for s in subjects:
        available = pool.size - (1 if int(s) in pool_set else 0)
        if k > available:
            raise ValueError(
                f"k={k} exceeds the {available} available neighbors for subject {int(s)}"
            )

    dists = cdist(X[subjects], X[pool])
    # mask each subject's own pool entry, if present
    cols = np.searchsorted(pool, subjects)
    for row, (col, s) in enumerate(zip(cols, subjects)):
        if col < pool.size and pool[col] == s:
            dists[row, col] = np.inf

    # pool is sorted ascending, so a stable sort on distance breaks ties
    # at the K-th neighbor by ascending sample index
    order = np.argsort(dists, axis=1, kind="stable")
    nearest = np.take_along_axis(dists, order[:, :k], axis=1)
    mean_dist = nearest.mean(axis=1)
    values = np.where(mean_dist < MIN_DISTANCE, MAX_SCORE, 1.0 / np.maximum(mean_dist, MIN_DISTANCE))
    return ScoreVector(values=values, subject_indices=subjects)


def cluster_weights(centers, source: int, temperature: float = DEFAULT_TEMPERATURE) -> ClusterWeights:
    """Softmax over the negative distances from ``source`` to every other center.

    ``weights[j] = exp(-|c_i - c_j| / T) / sum_k exp(-|c_i - c_k| / T)``
    with the max logit subtracted before exponentiation for stability.
    """
    centers = as_float_matrix(centers, "centers")
    n_clusters = centers.shape[0]
    if n_clusters < 2:
        raise ValueError("at least two clusters are required to form weights")
    if not 0 <= source < n_clusters:
        raise ValueError(f"source cluster {source} out of range [0, {n_clusters})")
    if temperature <= 0:
        raise ValueError("temperature must be positive")

    others = np.array([j for j in range(n_clusters) if j != source], dtype=np.int64)
    dists = cdist(centers[source : source + 1], centers[others])[0]
    logits = -dists / temperature
    logits -= logits.max()
    expd = np.exp(logits)
    weights = expd / expd.sum()
    # at very low temperatures distant clusters underflow to 0; keep every
    # weight strictly positive without disturbing the 1e-9 normalization
    weights = np.maximum(weights, 1e-300)
    return ClusterWeights(
        source_cluster=int(source),
        weights={int(j): float(w) for j, w in zip(others, weights)},
        temperature=float(temperature),
    )


def sup_score(data, subject_indices, centers, source: int, weights: ClusterWeights) -> ScoreVector:
    """Inverse weighted mean distance to all other cluster centers.

    ``SUP(x) = (sum_j w[j] * |x - c_j|)^-1`` over clusters ``j != source``.
    Higher SUP means closer to the weighted inter-cluster boundary.
    """
    X = _as_matrix(data)
    centers = as_float_matrix(centers, "centers")
    if weights.source_cluster != source:
        raise ValueError(
            f"weights were built for cluster {weights.source_cluster}, not {source}"
        )
    subjects = check_index_list(subject_indices, X.shape[0], "subject_indices")
    other_ids, w = weights.as_arrays()
    expected = [j for j in range(centers.shape[0]) if j != source]
    if list(other_ids) != expected:
        raise ValueError("weights must cover every cluster except the source")

    dists = cdist(X[subjects], centers[other_ids])
    weighted = dists @ w
    values = np.where(weighted < MIN_DISTANCE, MAX_SCORE, 1.0 / np.maximum(weighted, MIN_DISTANCE))
    return ScoreVector(values=values, subject_indices=subjects)
