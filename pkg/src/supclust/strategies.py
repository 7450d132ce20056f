"""Query strategies: SUPClust, its ablations, and the baselines.

Every strategy maps ``(EmbeddingSet, LabeledPool, budget)`` to a batch of
distinct unlabeled sample indices. Strategies are sklearn-style estimators
(hyperparameters in ``__init__``, introspectable via ``get_params``) whose
single verb is :meth:`QueryStrategy.select`; all randomness flows from the
``seed`` parameter through an explicit generator, so identical seeds
reproduce identical batches.

The SUPClust family shares the same skeleton: partition the data into
``len(pool) + budget`` clusters, keep the biggest clusters untouched by the
labeled pool, then pick one sample per cluster. They differ only in the
per-cluster pick: the full method shortlists the most typical fraction and
takes the highest SUP; the ablations drop one of those two signals.
"""

import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator

from .clustering import kmeans, select_target_clusters
from .dataset import EmbeddingSet
from .exceptions import BudgetExhaustedError, ConfigError, MissingModelError
from .scoring import (
    DEFAULT_TEMPERATURE,
    DEFAULT_TYPICALITY_K,
    cluster_weights,
    sup_score,
    typicality,
)
from .validation import seeded_rng, sorted_index_array

DEFAULT_FILTER_FRACTION = 0.1

UNCERTAINTY_KINDS = ("margin", "entropy", "least_confidence")
STRATEGY_KINDS = (
    "supclust",
    "supclust_no_sup",
    "supclust_no_typicality",
    "typiclust_rp",
    "random",
    "coreset",
    "probcover",
) + UNCERTAINTY_KINDS


class LabeledPool:
    """The set of already-annotated sample indices (set semantics)."""

    def __init__(self, indices: Iterable[int] = ()):
        self._indices = frozenset(int(i) for i in indices)
        if any(i < 0 for i in self._indices):
            raise ValueError("labeled pool indices must be non-negative")

    @property
    def indices(self) -> frozenset:
        return self._indices

    def union(self, more: Iterable[int]) -> "LabeledPool":
        return LabeledPool(self._indices.union(int(i) for i in more))

    def to_array(self) -> np.ndarray:
        return np.array(sorted(self._indices), dtype=np.int64)

    def __len__(self) -> int:
        return len(self._indices)

    def __contains__(self, idx) -> bool:
        return int(idx) in self._indices

    def __iter__(self):
        return iter(sorted(self._indices))

    def __repr__(self) -> str:
        return f"LabeledPool({sorted(self._indices)!r})"


@dataclass(frozen=True)
class QueryResult:
    """An ordered batch of selected sample indices plus optional diagnostics.

    ``per_sample_trace`` holds one ``(cluster_id, typicality, sup)`` triple
    per selected sample for the clustering-based strategies; entries are
    NaN when the corresponding signal was not computed.
    """

    selected: np.ndarray
    per_sample_trace: list[tuple[int, float, float]] | None = None

    def __post_init__(self):
        selected = np.asarray(self.selected, dtype=np.int64)
        if np.unique(selected).size != selected.size:
            raise ValueError("selected indices must be distinct")
        object.__setattr__(self, "selected", selected)


@dataclass(frozen=True)
class StrategyConfig:
    """Strategy identity plus hyperparameters, as used by the harness/CLI."""

    kind: str
    temperature: float = DEFAULT_TEMPERATURE
    typicality_k: int = DEFAULT_TYPICALITY_K
    filter_fraction: float = DEFAULT_FILTER_FRACTION
    typicality_scope: str = "cluster"
    probcover_radius: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ConfigError(f"unknown strategy kind {self.kind!r}; expected one of {STRATEGY_KINDS}")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if self.typicality_k < 1:
            raise ConfigError("typicality_k must be >= 1")
        if not 0 < self.filter_fraction <= 1:
            raise ConfigError("filter_fraction must lie in (0, 1]")
        if self.typicality_scope not in ("cluster", "global"):
            raise ConfigError("typicality_scope must be 'cluster' or 'global'")
        if self.probcover_radius is not None and self.probcover_radius <= 0:
            raise ConfigError("probcover_radius must be positive")

    def with_seed(self, seed: int) -> "StrategyConfig":
        return replace(self, seed=seed)


def make_strategy(config: StrategyConfig) -> "QueryStrategy":
    """Instantiate the strategy a config describes."""
    kind = config.kind
    if kind == "supclust":
        return SupClust(
            temperature=config.temperature,
            typicality_k=config.typicality_k,
            filter_fraction=config.filter_fraction,
            typicality_scope=config.typicality_scope,
            seed=config.seed,
        )
    if kind == "supclust_no_sup":
        return SupClustNoSup(
            typicality_k=config.typicality_k,
            filter_fraction=config.filter_fraction,
            typicality_scope=config.typicality_scope,
            seed=config.seed,
        )
    if kind == "supclust_no_typicality":
        return SupClustNoTypicality(temperature=config.temperature, seed=config.seed)
    if kind == "typiclust_rp":
        return TypiClust(
            typicality_k=config.typicality_k,
            typicality_scope=config.typicality_scope,
            seed=config.seed,
        )
    if kind == "random":
        return RandomSampling(seed=config.seed)
    if kind == "coreset":
        return CoresetSampling(seed=config.seed)
    if kind == "probcover":
        return ProbCover(radius=config.probcover_radius, seed=config.seed)
    return UncertaintySampling(measure=kind, seed=config.seed)


class QueryStrategy(BaseEstimator):
    """Base class: validates the query contract and dispatches to ``_select``."""

    kind: str = ""

    def select(self, data: EmbeddingSet, pool, budget: int, proba=None) -> QueryResult:
        """Choose ``budget`` distinct unlabeled samples.

        ``proba`` carries classifier probabilities for uncertainty
        strategies and is ignored by the rest.
        """
        if not isinstance(data, EmbeddingSet):
            data = EmbeddingSet(data)
        if budget < 1:
            raise ValueError("budget must be >= 1")
        pool_arr = _pool_array(pool, data.n)
        if pool_arr.size + budget > data.n:
            raise BudgetExhaustedError(
                f"budget {budget} plus {pool_arr.size} labeled samples exceeds pool size {data.n}"
            )
        result = self._select(data, pool_arr, budget, proba)
        return _check_contract(result, pool_arr, budget, data.n)

    def _select(self, data: EmbeddingSet, pool: np.ndarray, budget: int, proba) -> QueryResult:
        raise NotImplementedError


def _pool_array(pool, n: int) -> np.ndarray:
    indices = getattr(pool, "indices", pool)
    return sorted_index_array(indices, n, "labeled pool")


def _check_contract(result: QueryResult, pool: np.ndarray, budget: int, n: int) -> QueryResult:
    sel = result.selected
    if sel.size != budget:
        raise RuntimeError(f"strategy returned {sel.size} indices, expected {budget}")
    if sel.min() < 0 or sel.max() >= n:
        raise RuntimeError("strategy returned an out-of-range index")
    if np.intersect1d(sel, pool).size:
        raise RuntimeError("strategy returned an already-labeled index")
    return result


def _unlabeled(n: int, pool: np.ndarray) -> np.ndarray:
    return np.setdiff1d(np.arange(n, dtype=np.int64), pool, assume_unique=True)


# ---------------------------------------------------------------------------
# SUPClust family


class _ClusterBasedStrategy(QueryStrategy):
    """Shared skeleton: cluster, pick target clusters, pick one sample each."""

    def _select(self, data, pool, budget, proba):
        n_clusters = pool.size + budget
        clustering = kmeans(data, n_clusters, seed=self.seed)
        targets = select_target_clusters(clustering, pool, budget)
        rng = seeded_rng(self.seed, 1)

        picks: list[int] = []
        trace: list[tuple[int, float, float]] = []
        for cluster_id in targets:
            members = clustering.members(cluster_id)
            candidates = members[~np.isin(members, pool, assume_unique=True)] if pool.size else members
            if candidates.size == 0:
                continue
            idx, typ, sup = self._pick(data, clustering, cluster_id, members, candidates, rng)
            picks.append(idx)
            trace.append((int(cluster_id), typ, sup))

        # Unreachable when every cluster is non-empty (there are always at
        # least `budget` clean clusters then), but keeps the budget contract
        # if target clusters were exhausted by the labeled pool.
        if len(picks) < budget:
            leftovers = np.setdiff1d(_unlabeled(data.n, pool), np.array(picks, dtype=np.int64))
            for idx in leftovers[: budget - len(picks)]:
                picks.append(int(idx))
                trace.append((int(clustering.assignment[idx]), math.nan, math.nan))

        return QueryResult(selected=np.array(picks, dtype=np.int64), per_sample_trace=trace)

    def _pick(self, data, clustering, cluster_id, members, candidates, rng):
        raise NotImplementedError

    def _typicality_values(self, data, members, candidates) -> np.ndarray:
        """Typicality of each candidate; all-ones when no neighbor exists."""
        scope_global = getattr(self, "typicality_scope", "cluster") == "global"
        neighbor_pool = np.arange(data.n, dtype=np.int64) if scope_global else members
        if neighbor_pool.size < 2:
            return np.ones(candidates.size, dtype=np.float64)
        k = min(self.typicality_k, neighbor_pool.size - 1)
        return typicality(data, candidates, neighbor_pool, k).values

    def _shortlist(self, candidates: np.ndarray, typ: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Top ``filter_fraction`` of candidates by typicality (at least one)."""
        keep = max(1, math.ceil(self.filter_fraction * candidates.size))
        order = np.argsort(-typ, kind="stable")[:keep]
        return candidates[order], typ[order]

    def _sup_values(self, data, clustering, cluster_id, subjects) -> np.ndarray:
        """SUP of each subject; all-zeros when no other cluster exists."""
        if clustering.n_clusters < 2:
            return np.zeros(subjects.size, dtype=np.float64)
        weights = cluster_weights(clustering.centers, cluster_id, self.temperature)
        return sup_score(data, subjects, clustering.centers, cluster_id, weights).values


class SupClust(_ClusterBasedStrategy):
    """Shortlist the most typical samples per cluster, take the highest SUP.

    SUP argmax ties are broken by higher typicality, then ascending index.
    """

    kind = "supclust"

    def __init__(
        self,
        temperature: float = DEFAULT_TEMPERATURE,
        typicality_k: int = DEFAULT_TYPICALITY_K,
        filter_fraction: float = DEFAULT_FILTER_FRACTION,
        typicality_scope: str = "cluster",
        seed: int = 0,
    ):
        self.temperature = temperature
        self.typicality_k = typicality_k
        self.filter_fraction = filter_fraction
        self.typicality_scope = typicality_scope
        self.seed = seed

    def _pick(self, data, clustering, cluster_id, members, candidates, rng):
        typ = self._typicality_values(data, members, candidates)
        shortlist, short_typ = self._shortlist(candidates, typ)
        sup = self._sup_values(data, clustering, cluster_id, shortlist)
        best = np.lexsort((shortlist, -short_typ, -sup))[0]
        return int(shortlist[best]), float(short_typ[best]), float(sup[best])


class SupClustNoSup(_ClusterBasedStrategy):
    """Ablation: seeded uniform choice from the typicality shortlist."""

    kind = "supclust_no_sup"

    def __init__(
        self,
        typicality_k: int = DEFAULT_TYPICALITY_K,
        filter_fraction: float = DEFAULT_FILTER_FRACTION,
        typicality_scope: str = "cluster",
        seed: int = 0,
    ):
        self.typicality_k = typicality_k
        self.filter_fraction = filter_fraction
        self.typicality_scope = typicality_scope
        self.seed = seed

    def _pick(self, data, clustering, cluster_id, members, candidates, rng):
        typ = self._typicality_values(data, members, candidates)
        shortlist, short_typ = self._shortlist(candidates, typ)
        order = np.argsort(shortlist)
        choice = int(rng.integers(shortlist.size))
        pos = order[choice]
        return int(shortlist[pos]), float(short_typ[pos]), math.nan


class SupClustNoTypicality(_ClusterBasedStrategy):
    """Ablation: highest SUP over the whole cluster, no typicality filter."""

    kind = "supclust_no_typicality"

    def __init__(self, temperature: float = DEFAULT_TEMPERATURE, seed: int = 0):
        self.temperature = temperature
        self.seed = seed

    def _pick(self, data, clustering, cluster_id, members, candidates, rng):
        sup = self._sup_values(data, clustering, cluster_id, candidates)
        best = np.lexsort((candidates, -sup))[0]
        return int(candidates[best]), math.nan, float(sup[best])


class TypiClust(_ClusterBasedStrategy):
    """Baseline: the most typical sample of each target cluster."""

    kind = "typiclust_rp"

    def __init__(
        self,
        typicality_k: int = DEFAULT_TYPICALITY_K,
        typicality_scope: str = "cluster",
        seed: int = 0,
    ):
        self.typicality_k = typicality_k
        self.typicality_scope = typicality_scope
        self.seed = seed

    def _pick(self, data, clustering, cluster_id, members, candidates, rng):
        typ = self._typicality_values(data, members, candidates)
        best = np.lexsort((candidates, -typ))[0]
        return int(candidates[best]), float(typ[best]), math.nan


# ---------------------------------------------------------------------------
# Baselines


class RandomSampling(QueryStrategy):
    """Seeded uniform sampling without replacement from the unlabeled pool."""

    kind = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _select(self, data, pool, budget, proba):
        rng = seeded_rng(self.seed)
        unlabeled = _unlabeled(data.n, pool)
        picks = rng.choice(unlabeled, size=budget, replace=False)
        return QueryResult(selected=picks.astype(np.int64))


class CoresetSampling(QueryStrategy):
    """Greedy k-center: repeatedly take the unlabeled point farthest from
    the labeled set plus the points selected so far. Ties go to the lower
    index; with an empty pool the first pick is index 0."""

    kind = "coreset"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _select(self, data, pool, budget, proba):
        X = data.embeddings
        unlabeled = _unlabeled(data.n, pool)
        if pool.size:
            min_dist = cdist(X[unlabeled], X[pool]).min(axis=1)
        else:
            min_dist = np.full(unlabeled.size, np.inf)
        picks = np.empty(budget, dtype=np.int64)
        for i in range(budget):
            j = int(np.argmax(min_dist))
            picks[i] = unlabeled[j]
            new_dist = cdist(X[unlabeled], X[picks[i] : picks[i] + 1])[:, 0]
            min_dist = np.minimum(min_dist, new_dist)
            min_dist[j] = -1.0
        return QueryResult(selected=picks)


def median_nn_radius(data) -> float:
    """Median 1-NN distance over the dataset; the default ProbCover radius."""
    X = data.embeddings if isinstance(data, EmbeddingSet) else np.asarray(data, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValueError("at least two samples are required")
    nn = np.empty(X.shape[0])
    for start in range(0, X.shape[0], 1024):
        block = slice(start, min(start + 1024, X.shape[0]))
        d = cdist(X[block], X)
        rows = np.arange(block.start, block.stop)
        d[rows - block.start, rows] = np.inf
        nn[block] = d.min(axis=1)
    return float(np.median(nn))


class ProbCover(QueryStrategy):
    """Greedy maximum coverage with fixed-radius balls.

    Each pick is the unlabeled point whose ball covers the most points not
    yet covered (by the labeled pool's balls or earlier picks); covered
    points stop counting toward the gain. Ties go to the lower index.
    """

    kind = "probcover"

    def __init__(self, radius: float | None = None, seed: int = 0):
        self.radius = radius
        self.seed = seed

    def _select(self, data, pool, budget, proba):
        radius = self.radius if self.radius is not None else median_nn_radius(data)
        if radius <= 0:
            raise ConfigError("probcover radius must be positive")
        X = data.embeddings
        n = data.n
        covered = np.zeros(n, dtype=bool)
        if pool.size:
            covered |= (cdist(X[pool], X) <= radius).any(axis=0)

        unlabeled = _unlabeled(n, pool)
        active = np.ones(unlabeled.size, dtype=bool)
        dense = unlabeled.size * n <= 16_000_000
        balls = (cdist(X[unlabeled], X) <= radius) if dense else None

        picks = np.empty(budget, dtype=np.int64)
        for step in range(budget):
            if dense:
                gains = np.where(active, (balls & ~covered).sum(axis=1), -1)
            else:
                gains = np.full(unlabeled.size, -1, dtype=np.int64)
                for pos in np.flatnonzero(active):
                    idx = int(unlabeled[pos])
                    ball = cdist(X[idx : idx + 1], X)[0] <= radius
                    gains[pos] = int((ball & ~covered).sum())
            j = int(np.argmax(gains))  # unlabeled is ascending, so ties go low
            idx = int(unlabeled[j])
            picks[step] = idx
            ball_j = balls[j] if dense else (cdist(X[idx : idx + 1], X)[0] <= radius)
            covered |= ball_j
            active[j] = False
        return QueryResult(selected=picks)


class UncertaintySampling(QueryStrategy):
    """Margin / entropy / least-confidence selection from model probabilities.

    Requires a row-stochastic ``(n, num_classes)`` probability matrix from
    the current classifier; raises MissingModelError without one.
    """

    def __init__(self, measure: str = "margin", seed: int = 0):
        self.measure = measure
        self.seed = seed

    @property
    def kind(self) -> str:
        return self.measure

    def _select(self, data, pool, budget, proba):
        if self.measure not in UNCERTAINTY_KINDS:
            raise ConfigError(f"unknown uncertainty measure {self.measure!r}")
        if proba is None:
            raise MissingModelError(
                f"strategy {self.measure!r} needs classifier probabilities; none were provided"
            )
        proba = np.asarray(proba, dtype=np.float64)
        if proba.ndim != 2 or proba.shape[0] != data.n:
            raise ValueError(f"probability matrix must be ({data.n}, num_classes)")
        if proba.shape[1] < 2:
            raise ValueError("probability matrix needs at least two classes")
        sums = proba.sum(axis=1)
        if np.abs(sums - 1.0).max() > 1e-6:
            raise ValueError("probability rows must sum to 1 within 1e-6")

        unlabeled = _unlabeled(data.n, pool)
        p = proba[unlabeled]
        if self.measure == "margin":
            top2 = -np.partition(-p, 1, axis=1)[:, :2]
            key = top2[:, 0] - top2[:, 1]  # smallest margin first
        elif self.measure == "least_confidence":
            key = p.max(axis=1)  # smallest max-probability first
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                plogp = np.where(p > 0, p * np.log(p), 0.0)
            key = plogp.sum(axis=1)  # largest entropy == smallest sum(p log p)
        order = np.lexsort((unlabeled, key))
        return QueryResult(selected=unlabeled[order[:budget]].astype(np.int64))
