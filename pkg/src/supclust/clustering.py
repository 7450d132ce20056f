"""Embedding-space partitioning and target-cluster selection.

k-means with k-means++ initialization (Lloyd iterations, deterministic
under a fixed seed) plus the rule that picks which clusters a query step
draws from: clusters already touched by the labeled pool are excluded and
the biggest remaining clusters are taken, as many as samples are queried.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, ClusterMixin

from .dataset import EmbeddingSet
from .validation import as_float_matrix, seeded_rng, sorted_index_array

DEFAULT_MAX_ITERS = 300
DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class Clustering:
    """A partition of n samples into clusters with centroids and sizes.

    ``objective_history`` records the sum of squared distances to assigned
    centers after each Lloyd pass.
    """

    assignment: np.ndarray
    centers: np.ndarray
    sizes: np.ndarray
    objective_history: tuple[float, ...] = field(default=())
    n_iter: int = 0

    def __post_init__(self):
        assignment = np.asarray(self.assignment, dtype=np.int64)
        centers = as_float_matrix(self.centers, "centers")
        n_clusters = centers.shape[0]
        if assignment.ndim != 1 or assignment.size < 1:
            raise ValueError("assignment must be a non-empty 1-D vector")
        if assignment.min() < 0 or assignment.max() >= n_clusters:
            raise ValueError("assignment references a cluster id outside [0, N)")
        sizes = np.bincount(assignment, minlength=n_clusters).astype(np.int64)
        declared = np.asarray(self.sizes, dtype=np.int64)
        if not np.array_equal(sizes, declared):
            raise ValueError("sizes inconsistent with assignment")
        if sizes.min() < 1:
            raise ValueError(f"cluster {int(np.argmin(sizes))} is empty")
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "objective_history", tuple(float(v) for v in self.objective_history))

    @property
    def n_clusters(self) -> int:
        return self.centers.shape[0]

    @property
    def n_samples(self) -> int:
        return self.assignment.shape[0]

    def members(self, cluster_id: int) -> np.ndarray:
        """Sample indices assigned to ``cluster_id``, ascending."""
        return np.flatnonzero(self.assignment == cluster_id)


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, EmbeddingSet):
        return data.embeddings
    return as_float_matrix(data, "data")


def _kmeans_pp_init(X: np.ndarray, n_clusters: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((n_clusters, X.shape[1]), dtype=np.float64)
    chosen = np.zeros(n, dtype=bool)
    first = int(rng.integers(n))
    centers[0] = X[first]
    chosen[first] = True
    closest_sq = cdist(X, centers[:1], "sqeuclidean")[:, 0]
    for i in range(1, n_clusters):
        total = closest_sq.sum()
        if total <= 0.0:
            # All remaining points coincide with chosen centers; fall back
            # to the lowest unchosen index to stay deterministic.
            idx = int(np.flatnonzero(~chosen)[0])
        else:
            idx = int(rng.choice(n, p=closest_sq / total))
        centers[i] = X[idx]
        chosen[idx] = True
        closest_sq = np.minimum(closest_sq, cdist(X, centers[i : i + 1], "sqeuclidean")[:, 0])
    return centers


def _nearest_labels(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # argmin breaks distance ties toward the lower cluster id
    return np.argmin(cdist(X, centers, "sqeuclidean"), axis=1)


def _repair_empty(X: np.ndarray, centers: np.ndarray, labels: np.ndarray, n_clusters: int) -> np.ndarray:
    """Move one point into each empty cluster so every size stays >= 1.

    The point taken is the member of the currently largest cluster that is
    farthest from the empty cluster's center (ties toward the lower index).
    """
    sizes = np.bincount(labels, minlength=n_clusters)
    while sizes.min() == 0:
        empty = int(np.argmin(sizes))
        donor = int(np.argmax(sizes))
        members = np.flatnonzero(labels == donor)
        dists = cdist(X[members], centers[empty : empty + 1])[:, 0]
        steal = int(members[np.argmax(dists)])
        labels[steal] = empty
        sizes[empty] += 1
        sizes[donor] -= 1
    return labels


def _class_means(X: np.ndarray, labels: np.ndarray, n_clusters: int) -> np.ndarray:
    sums = np.zeros((n_clusters, X.shape[1]), dtype=np.float64)
    np.add.at(sums, labels, X)
    counts = np.bincount(labels, minlength=n_clusters).astype(np.float64)
    return sums / counts[:, None]


def _inertia(X: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> float:
    diff = X - centers[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def kmeans(
    data,
    n_clusters: int,
    seed: int = 0,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> Clustering:
    """Partition embeddings into ``n_clusters`` clusters.

    Lloyd iterations run until the assignment reaches a fixed point, the
    maximum center shift drops below ``tol``, or ``max_iters`` passes have
    been performed. Identical seeds yield identical results.
    """
    X = _as_matrix(data)
    n = X.shape[0]
    if n_clusters < 1:
        raise ValueError("n_clusters must be >= 1")
    if n_clusters > n:
        raise ValueError(f"n_clusters={n_clusters} exceeds sample count {n}")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")

    if n_clusters == n:
        assignment = np.arange(n, dtype=np.int64)
        return Clustering(
            assignment=assignment,
            centers=X.copy(),
            sizes=np.ones(n, dtype=np.int64),
            objective_history=(0.0,),
            n_iter=1,
        )

    rng = seeded_rng(seed)
    centers = _kmeans_pp_init(X, n_clusters, rng)
    history: list[float] = []
    labels = None
    iterations = 0
    for _ in range(max_iters):
        new_labels = _nearest_labels(X, centers)
        new_labels = _repair_empty(X, centers, new_labels, n_clusters)
        iterations += 1
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        new_centers = _class_means(X, labels, n_clusters)
        history.append(_inertia(X, new_centers, labels))
        shift = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
        centers = new_centers
        if shift < tol:
            break

    return Clustering(
        assignment=labels.astype(np.int64),
        centers=centers,
        sizes=np.bincount(labels, minlength=n_clusters).astype(np.int64),
        objective_history=tuple(history),
        n_iter=iterations,
    )


def select_target_clusters(clustering: Clustering, pool, budget: int) -> list[int]:
    """Pick the clusters the current query step draws from.

    Clusters containing samples from the labeled pool are excluded and the
    biggest remaining clusters are returned, as many as samples are queried.
    When fewer than ``budget`` clean clusters exist, clean clusters are
    exhausted first and the biggest already-covered clusters fill the rest.
    Ordering is by descending size with ties broken by ascending cluster id.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if budget > clustering.n_clusters:
        raise ValueError(
            f"budget={budget} exceeds the number of clusters {clustering.n_clusters}"
        )
    pool_arr = _pool_to_array(pool, clustering.n_samples)
    covered = np.zeros(clustering.n_clusters, dtype=bool)
    if pool_arr.size:
        covered[np.unique(clustering.assignment[pool_arr])] = True

    ids = np.arange(clustering.n_clusters)
    order = np.lexsort((ids, -clustering.sizes))
    clean = [int(i) for i in order if not covered[i]]
    fallback = [int(i) for i in order if covered[i]]
    return (clean + fallback)[:budget]


def _pool_to_array(pool, n: int) -> np.ndarray:
    indices = getattr(pool, "indices", pool)
    return sorted_index_array(indices, n, "labeled pool")


class KMeansPartition(BaseEstimator, ClusterMixin):
    """Estimator-style wrapper around :func:`kmeans`.

    After ``fit`` the partition is exposed through ``labels_``,
    ``cluster_centers_``, ``cluster_sizes_``, ``objective_history_`` and
    ``n_iter_``, so the clusterer drops into sklearn pipelines and
    model-selection utilities.
    """

    def __init__(
        self,
        n_clusters: int = 8,
        seed: int = 0,
        max_iters: int = DEFAULT_MAX_ITERS,
        tol: float = DEFAULT_TOL,
    ):
        self.n_clusters = n_clusters
        self.seed = seed
        self.max_iters = max_iters
        self.tol = tol

    def fit(self, X, y=None):
        result = kmeans(X, self.n_clusters, seed=self.seed, max_iters=self.max_iters, tol=self.tol)
        self.labels_ = result.assignment
        self.cluster_centers_ = result.centers
        self.cluster_sizes_ = result.sizes
        self.objective_history_ = result.objective_history
        self.n_iter_ = result.n_iter
        self.clustering_ = result
        return self

    def predict(self, X):
        """Assign new points to the nearest fitted center."""
        X = _as_matrix(X)
        return _nearest_labels(X, self.cluster_centers_)
