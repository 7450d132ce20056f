"""Linear probe: multinomial logistic regression on frozen embeddings.

Fit by full-batch gradient descent on the mean cross-entropy with an L2
penalty on the weights, starting from zero parameters, so training is
fully deterministic. Rows of classes absent from the training set are
kept at zero; their probability still comes from the shared softmax.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .validation import as_float_matrix, check_labels

DEFAULT_LEARNING_RATE = 0.1
DEFAULT_EPOCHS = 200
DEFAULT_L2 = 1e-4


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-logit subtraction."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_gradient(weights, bias, X, y, l2: float, num_classes: int):
    """Mean cross-entropy plus L2 penalty, with its analytic gradient.

    Returns ``(loss, grad_weights, grad_bias)`` for parameters of shape
    ``(num_classes, d)`` and ``(num_classes,)``.
    """
    W = np.asarray(weights, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    m = X.shape[0]
    logits = X @ W.T + b
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    log_proba = z - log_norm[:, None]
    nll = -log_proba[np.arange(m), y].mean()
    loss = nll + 0.5 * l2 * float((W * W).sum())

    proba = np.exp(log_proba)
    delta = proba
    delta[np.arange(m), y] -= 1.0
    grad_w = delta.T @ X / m + l2 * W
    grad_b = delta.mean(axis=0)
    return float(loss), grad_w, grad_b


class LinearProbe(BaseEstimator, ClassifierMixin):
    """Deterministic multinomial logistic-regression classifier.

    Attributes after ``fit``: ``weights_`` (num_classes x d), ``bias_``,
    ``loss_history_`` (one entry per epoch), and ``trained_on_`` when the
    harness records the labeled snapshot.
    """

    def __init__(
        self,
        learning_rate: float = DEFAULT_LEARNING_RATE,
        epochs: int = DEFAULT_EPOCHS,
        l2: float = DEFAULT_L2,
    ):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2

    def fit(self, X, y, num_classes: int | None = None):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        X = as_float_matrix(X, "X")
        y = check_labels(y, X.shape[0], num_classes)
        if num_classes is None:
            num_classes = int(y.max()) + 1

        W = np.zeros((num_classes, X.shape[1]), dtype=np.float64)
        b = np.zeros(num_classes, dtype=np.float64)
        present = np.isin(np.arange(num_classes), np.unique(y))
        history = []
        for _ in range(self.epochs):
            loss, grad_w, grad_b = loss_and_gradient(W, b, X, y, self.l2, num_classes)
            # classes never seen in the pool keep their zero rows
            grad_w[~present] = 0.0
            grad_b[~present] = 0.0
            W -= self.learning_rate * grad_w
            b -= self.learning_rate * grad_b
            history.append(loss)

        self.weights_ = W
        self.bias_ = b
        self.num_classes_ = num_classes
        self.classes_ = np.arange(num_classes)
        self.loss_history_ = history
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = as_float_matrix(X, "X")
        return softmax(X @ self.weights_.T + self.bias_)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)
