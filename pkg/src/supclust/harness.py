"""Simulated active-learning runs over labeled embedding sets.

Each run carves out a seeded stratified test split, then iterates
query -> label from ground truth -> retrain a linear probe -> evaluate.
Strategies only ever see the training partition, and they see it without
labels; ground truth is consulted exclusively by the harness. Runs are
deterministic per (data, config, seed) and independent across seeds, so
they can execute concurrently.
"""

from dataclasses import dataclass, field

import numpy as np

from .dataset import EmbeddingSet
from .exceptions import BudgetExhaustedError, ConfigError
from .probe import DEFAULT_EPOCHS, DEFAULT_L2, DEFAULT_LEARNING_RATE, LinearProbe
from .strategies import (
    UNCERTAINTY_KINDS,
    LabeledPool,
    RandomSampling,
    StrategyConfig,
    make_strategy,
)
from .validation import derive_seed, seeded_rng

DEFAULT_TEST_FRACTION = 0.2

_SPLIT_SALT = 101
_STEP_SALT = 202
REGIMES = ("tiny", "small", "custom")


@dataclass(frozen=True)
class BudgetSchedule:
    """Per-step query size and step count.

    The tiny regime queries ``num_classes`` samples per step, the small
    regime ``5 * num_classes``; custom schedules carry an explicit size.
    """

    regime: str
    step_size: int
    num_steps: int

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if self.step_size < 1:
            raise ConfigError("step_size must be >= 1")
        if self.num_steps < 1:
            raise ConfigError("num_steps must be >= 1")

    @classmethod
    def tiny(cls, num_classes: int, num_steps: int) -> "BudgetSchedule":
        return cls(regime="tiny", step_size=num_classes, num_steps=num_steps)

    @classmethod
    def small(cls, num_classes: int, num_steps: int) -> "BudgetSchedule":
        return cls(regime="small", step_size=5 * num_classes, num_steps=num_steps)

    @classmethod
    def custom(cls, step_size: int, num_steps: int) -> "BudgetSchedule":
        return cls(regime="custom", step_size=step_size, num_steps=num_steps)

    @classmethod
    def for_regime(cls, regime: str, num_classes: int, num_steps: int) -> "BudgetSchedule":
        if regime == "tiny":
            return cls.tiny(num_classes, num_steps)
        if regime == "small":
            return cls.small(num_classes, num_steps)
        raise ConfigError(f"regime must be 'tiny' or 'small', got {regime!r}")

    def validate_for(self, num_classes: int) -> None:
        expected = {"tiny": num_classes, "small": 5 * num_classes}.get(self.regime)
        if expected is not None and self.step_size != expected:
            raise ConfigError(
                f"{self.regime} regime requires step_size={expected} "
                f"for {num_classes} classes, got {self.step_size}"
            )


@dataclass(frozen=True)
class StepRecord:
    labeled_count: int
    test_accuracy: float
    per_class_accuracy: dict[int, float]
    mean_per_class_accuracy: float


@dataclass(frozen=True)
class ALRunRecord:
    """Per-step results of one simulated active-learning run."""

    strategy_kind: str
    seed: int
    schedule: BudgetSchedule
    steps: tuple[StepRecord, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "strategy_kind": self.strategy_kind,
            "seed": self.seed,
            "schedule": {
                "regime": self.schedule.regime,
                "step_size": self.schedule.step_size,
                "num_steps": self.schedule.num_steps,
            },
            "steps": [
                {
                    "labeled_count": s.labeled_count,
                    "test_accuracy": s.test_accuracy,
                    "per_class_accuracy": {str(c): v for c, v in sorted(s.per_class_accuracy.items())},
                    "mean_per_class_accuracy": s.mean_per_class_accuracy,
                }
                for s in self.steps
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ALRunRecord":
        schedule = BudgetSchedule(
            regime=payload["schedule"]["regime"],
            step_size=payload["schedule"]["step_size"],
            num_steps=payload["schedule"]["num_steps"],
        )
        steps = tuple(
            StepRecord(
                labeled_count=int(s["labeled_count"]),
                test_accuracy=float(s["test_accuracy"]),
                per_class_accuracy={int(c): float(v) for c, v in s["per_class_accuracy"].items()},
                mean_per_class_accuracy=float(s["mean_per_class_accuracy"]),
            )
            for s in payload["steps"]
        )
        return cls(
            strategy_kind=payload["strategy_kind"],
            seed=int(payload["seed"]),
            schedule=schedule,
            steps=steps,
        )


@dataclass(frozen=True)
class SummaryRow:
    strategy: str
    step: int
    labeled_count: int
    mean_acc: float
    stderr_acc: float
    mean_balanced_acc: float
    stderr_balanced_acc: float


def train_linear_probe(
    data: EmbeddingSet,
    pool,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    epochs: int = DEFAULT_EPOCHS,
    l2: float = DEFAULT_L2,
) -> LinearProbe:
    """Fit a probe on the labeled pool's embeddings and ground-truth labels."""
    indices = pool.to_array() if isinstance(pool, LabeledPool) else np.asarray(sorted(set(pool)), dtype=np.int64)
    if indices.size == 0:
        raise ConfigError("cannot train a probe on an empty labeled pool")
    if data.labels is None:
        raise ConfigError("training requires ground-truth labels")
    if indices.min() < 0 or indices.max() >= data.n:
        raise ValueError("labeled pool contains an index outside the dataset")
    probe = LinearProbe(learning_rate=learning_rate, epochs=epochs, l2=l2)
    probe.fit(data.embeddings[indices], data.labels[indices], num_classes=data.num_classes)
    probe.trained_on_ = indices
    return probe


def stratified_split(data: EmbeddingSet, test_fraction: float, seed: int):
    """Seeded stratified test split; returns (train_indices, test_indices)."""
    if data.labels is None:
        raise ConfigError("a stratified split requires labels")
    if not 0 < test_fraction < 1:
        raise ConfigError("test_fraction must lie in (0, 1)")
    rng = seeded_rng(seed, _SPLIT_SALT)
    test_parts = []
    for c in range(data.num_classes):
        members = np.flatnonzero(data.labels == c)
        if members.size == 0:
            continue
        take = min(members.size, max(1, int(round(test_fraction * members.size))))
        test_parts.append(rng.permutation(members)[:take])
    test_idx = np.sort(np.concatenate(test_parts))
    train_idx = np.setdiff1d(np.arange(data.n, dtype=np.int64), test_idx, assume_unique=True)
    if train_idx.size == 0:
        raise ConfigError("test split leaves no training samples")
    return train_idx, test_idx


def run_al_loop(
    data: EmbeddingSet,
    config: StrategyConfig,
    schedule: BudgetSchedule,
    seed: int,
    test_fraction: float = DEFAULT_TEST_FRACTION,
    probe_params: dict | None = None,
) -> ALRunRecord:
    """Simulate one active-learning run and record per-step accuracies.

    ``seed`` drives the test split and the per-step strategy seeds (the
    seed carried by ``config`` is overridden step by step so that repeated
    steps never reuse a generator state). Uncertainty strategies receive
    the previous step's probe probabilities; the first step falls back to
    seeded random selection because no probe exists yet.
    """
    if data.labels is None:
        raise ConfigError("the simulation harness requires labeled data")
    schedule.validate_for(data.num_classes)
    probe_params = probe_params or {}

    train_idx, test_idx = stratified_split(data, test_fraction, seed)
    total_budget = schedule.step_size * schedule.num_steps
    if total_budget > train_idx.size:
        raise BudgetExhaustedError(
            f"schedule needs {total_budget} samples but only {train_idx.size} are queryable"
        )

    train = EmbeddingSet(
        data.embeddings[train_idx], labels=data.labels[train_idx], num_classes=data.num_classes
    )
    strategy_view = train.without_labels()
    test_X = data.embeddings[test_idx]
    test_y = data.labels[test_idx]

    pool = LabeledPool()
    probe = None
    steps = []
    for step in range(schedule.num_steps):
        step_seed = derive_seed(seed, _STEP_SALT, step)
        if config.kind in UNCERTAINTY_KINDS:
            if probe is None:
                result = RandomSampling(seed=step_seed).select(strategy_view, pool, schedule.step_size)
            else:
                strategy = make_strategy(config.with_seed(step_seed))
                proba = probe.predict_proba(train.embeddings)
                result = strategy.select(strategy_view, pool, schedule.step_size, proba=proba)
        else:
            strategy = make_strategy(config.with_seed(step_seed))
            result = strategy.select(strategy_view, pool, schedule.step_size)

        pool = pool.union(int(i) for i in result.selected)
        probe = train_linear_probe(train, pool, **probe_params)
        steps.append(_evaluate(probe, test_X, test_y, labeled_count=len(pool)))

    return ALRunRecord(strategy_kind=config.kind, seed=seed, schedule=schedule, steps=tuple(steps))


def _evaluate(probe: LinearProbe, test_X, test_y, labeled_count: int) -> StepRecord:
    pred = probe.predict(test_X)
    accuracy = float(np.mean(pred == test_y))
    per_class = {}
    for c in np.unique(test_y):
        mask = test_y == c
        per_class[int(c)] = float(np.mean(pred[mask] == c))
    return StepRecord(
        labeled_count=labeled_count,
        test_accuracy=accuracy,
        per_class_accuracy=per_class,
        mean_per_class_accuracy=float(np.mean(list(per_class.values()))),
    )


def summarize_runs(records: list[ALRunRecord]) -> list[SummaryRow]:
    """Mean accuracy and standard error per strategy per step.

    All records must share the same schedule. The standard error is the
    sample standard deviation over runs divided by sqrt(#runs), zero for a
    single run. Rows are ordered by (strategy, step).
    """
    if not records:
        raise ConfigError("no records to summarize")
    schedule = records[0].schedule
    for rec in records[1:]:
        if rec.schedule != schedule:
            raise ConfigError("records mix different schedules")

    by_strategy: dict[str, list[ALRunRecord]] = {}
    for rec in records:
        by_strategy.setdefault(rec.strategy_kind, []).append(rec)

    rows = []
    for strategy in sorted(by_strategy):
        runs = by_strategy[strategy]
        for step in range(schedule.num_steps):
            accs = np.array([run.steps[step].test_accuracy for run in runs])
            balanced = np.array([run.steps[step].mean_per_class_accuracy for run in runs])
            rows.append(
                SummaryRow(
                    strategy=strategy,
                    step=step + 1,
                    labeled_count=runs[0].steps[step].labeled_count,
                    mean_acc=float(accs.mean()),
                    stderr_acc=_stderr(accs),
                    mean_balanced_acc=float(balanced.mean()),
                    stderr_balanced_acc=_stderr(balanced),
                )
            )
    return rows


def _stderr(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / np.sqrt(values.size))
