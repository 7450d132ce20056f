"""Pool-based active-learning query strategies over embedding spaces.

The core selection method clusters self-supervised embeddings, keeps the
most typical samples of each cluster, and queries the sample closest to
the softmax-weighted boundary toward the other clusters. Ablations,
classic baselines (random, greedy k-center, max-coverage, uncertainty),
and a desk-scale simulation harness ship alongside.
"""

__version__ = "0.1.0"

from .clustering import Clustering, KMeansPartition, kmeans, select_target_clusters
from .dataset import (
    EmbeddingSet,
    ImbalanceProfile,
    l2_normalize,
    load_embeddings,
    make_blobs,
    save_embeddings,
)
from .exceptions import (
    BudgetExhaustedError,
    ConfigError,
    DataFormatError,
    MissingModelError,
    SupclustError,
)
from .harness import (
    ALRunRecord,
    BudgetSchedule,
    StepRecord,
    SummaryRow,
    run_al_loop,
    stratified_split,
    summarize_runs,
    train_linear_probe,
)
from .probe import LinearProbe, loss_and_gradient, softmax
from .scoring import ClusterWeights, ScoreVector, cluster_weights, sup_score, typicality
from .strategies import (
    STRATEGY_KINDS,
    CoresetSampling,
    LabeledPool,
    ProbCover,
    QueryResult,
    QueryStrategy,
    RandomSampling,
    StrategyConfig,
    SupClust,
    SupClustNoSup,
    SupClustNoTypicality,
    TypiClust,
    UncertaintySampling,
    make_strategy,
    median_nn_radius,
)

__all__ = [
    "__version__",
    "ALRunRecord",
    "BudgetSchedule",
    "BudgetExhaustedError",
    "Clustering",
    "ClusterWeights",
    "ConfigError",
    "CoresetSampling",
    "DataFormatError",
    "EmbeddingSet",
    "ImbalanceProfile",
    "KMeansPartition",
    "LabeledPool",
    "LinearProbe",
    "MissingModelError",
    "ProbCover",
    "QueryResult",
    "QueryStrategy",
    "RandomSampling",
    "ScoreVector",
    "StepRecord",
    "StrategyConfig",
    "SummaryRow",
    "SupClust",
    "SupClustNoSup",
    "SupClustNoTypicality",
    "SupclustError",
    "STRATEGY_KINDS",
    "TypiClust",
    "UncertaintySampling",
    "cluster_weights",
    "kmeans",
    "l2_normalize",
    "load_embeddings",
    "loss_and_gradient",
    "make_blobs",
    "make_strategy",
    "median_nn_radius",
    "run_al_loop",
    "save_embeddings",
    "select_target_clusters",
    "softmax",
    "stratified_split",
    "summarize_runs",
    "sup_score",
    "train_linear_probe",
    "typicality",
]
