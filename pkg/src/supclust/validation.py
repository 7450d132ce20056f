"""Input validation helpers and seeded RNG construction."""

from typing import Iterable

import numpy as np

_SEED_MASK = (1 << 64) - 1


def seeded_rng(*seeds: int) -> np.random.Generator:
    """Build a generator from one or more 64-bit seed words.

    Negative seeds are mapped to their unsigned 64-bit representation so
    that any Python int is accepted.
    """
    words = [int(s) & _SEED_MASK for s in seeds]
    return np.random.default_rng(np.random.SeedSequence(words))


def derive_seed(*seeds: int) -> int:
    """Deterministically mix seed words into a single 64-bit seed."""
    words = [int(s) & _SEED_MASK for s in seeds]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


def as_float_matrix(x, name: str, copy: bool = False) -> np.ndarray:
    """Coerce to a finite 2-D float64 array, raising ValueError otherwise."""
    arr = np.array(x, dtype=np.float64, copy=copy) if copy else np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        bad = int(np.flatnonzero(~np.isfinite(arr).all(axis=1))[0])
        raise ValueError(f"{name} contains a non-finite value in row {bad}")
    return arr


def check_labels(labels, n: int, num_classes: int | None) -> np.ndarray:
    """Validate a label vector against the sample count and class count."""
    arr = np.array(labels, dtype=np.int64, copy=True)
    if arr.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {arr.shape}")
    if arr.shape[0] != n:
        raise ValueError(f"labels length {arr.shape[0]} does not match sample count {n}")
    if arr.size and arr.min() < 0:
        raise ValueError("labels must be non-negative class ids")
    if num_classes is not None:
        if num_classes < 1:
            raise ValueError("num_classes must be positive")
        if arr.size and arr.max() >= num_classes:
            raise ValueError(f"label {int(arr.max())} out of range for num_classes={num_classes}")
    return arr


def check_index_list(indices, n: int, name: str, allow_duplicates: bool = False) -> np.ndarray:
    """Validate global sample indices against a pool of size n."""
    arr = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices)
    if arr.size == 0:
        return np.empty(0, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a flat index list")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise ValueError(f"{name} must contain integers")
    arr = arr.astype(np.int64)
    if arr.min() < 0 or arr.max() >= n:
        raise ValueError(f"{name} contains an index outside [0, {n})")
    if not allow_duplicates and np.unique(arr).size != arr.size:
        raise ValueError(f"{name} contains duplicate indices")
    return arr


def sorted_index_array(indices: Iterable[int], n: int, name: str) -> np.ndarray:
    """Deduplicate, validate, and sort indices ascending."""
    items = np.asarray(list(indices), dtype=np.int64)
    if items.size == 0:
        return np.empty(0, dtype=np.int64)
    arr = np.unique(items)
    if arr.min() < 0 or arr.max() >= n:
        raise ValueError(f"{name} contains an index outside [0, {n})")
    return arr
