import numpy as np
import pytest

from supclust import EmbeddingSet


@pytest.fixture
def two_blobs():
    """Two well-separated 2-D blobs of 20 points each, labels 0/1."""
    rng = np.random.default_rng(42)
    left = rng.normal(0.0, 0.3, size=(20, 2))
    right = rng.normal(0.0, 0.3, size=(20, 2)) + np.array([10.0, 0.0])
    X = np.concatenate([left, right])
    labels = np.array([0] * 20 + [1] * 20)
    return EmbeddingSet(X, labels=labels, num_classes=2)


def blob_cloud(n: int, d: int, seed: int, n_blobs: int = 4, spread: float = 10.0) -> np.ndarray:
    """Loose gaussian blobs for randomized oracle tests."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-spread, spread, size=(n_blobs, d))
    assign = rng.integers(n_blobs, size=n)
    return centers[assign] + rng.normal(0.0, 1.0, size=(n, d))
