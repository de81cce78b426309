"""Softmax-regression probe for measuring feature quality.

A deterministic multinomial linear classifier stands in for an external
classifier when comparing feature sets: same seed, same features, same
accuracy, every run. The trainer protects itself against a too-large
learning rate by reverting any epoch that increased the full-data loss
and halving the rate, so the recorded loss sequence is non-increasing.
"""

from dataclasses import dataclass, field

import numpy as np

LOG_EPS = 1e-12


@dataclass
class ProbeConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    l2: float = 1e-4
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0 or self.batch_size < 1:
            raise ValueError("l2 must be non-negative and batch_size >= 1")


@dataclass
class SoftmaxModel:
    weights: np.ndarray  # (n_features, n_classes)
    bias: np.ndarray  # (n_classes,)
    class_labels: np.ndarray  # distinct labels, sorted ascending
    loss_history: list = field(default_factory=list)
    rate_halvings: list = field(default_factory=list)  # (epoch, new_rate)


def softmax(scores):
    """Row-wise softmax with max-shift for stability."""
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _one_hot(labels, class_labels):
    index = np.searchsorted(class_labels, labels)
    if not np.array_equal(class_labels[index], labels):
        raise ValueError("labels contain values absent from class_labels")
    out = np.zeros((labels.shape[0], class_labels.shape[0]))
    out[np.arange(labels.shape[0]), index] = 1.0
    return out


def loss_and_grad(weights, bias, features, one_hot, l2):
    """Cross-entropy + (l2/2)||weights||^2 and its analytic gradient."""
    n = features.shape[0]
    probs = softmax(features @ weights + bias)
    ce = -np.sum(one_hot * np.log(probs + LOG_EPS)) / n
    loss = ce + 0.5 * l2 * float((weights**2).sum())
    diff = (probs - one_hot) / n
    grad_w = features.T @ diff + l2 * weights
    grad_b = diff.sum(axis=0)
    return loss, grad_w, grad_b


def train_softmax(features, labels, config):
    """Minibatch gradient descent on the regularized cross-entropy.

    Deterministic per seed. After each epoch the full-data loss is
    evaluated; an epoch that increased it is rolled back and the learning
    rate halved, with the event recorded on the returned model.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.shape[0] != labels.shape[0]:
        raise ValueError("feature rows must align with labels")
    class_labels = np.unique(labels)
    if class_labels.shape[0] < 2:
        raise ValueError("need at least 2 distinct labels")
    one_hot = _one_hot(labels, class_labels)

    n, d = features.shape
    c = class_labels.shape[0]
    weights = np.zeros((d, c))
    bias = np.zeros(c)
    rng = np.random.default_rng(config.seed)
    rate = config.learning_rate

    prev_loss, _, _ = loss_and_grad(weights, bias, features, one_hot, config.l2)
    history = [prev_loss]
    halvings = []
    for epoch in range(config.epochs):
        saved = (weights.copy(), bias.copy())
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            _, grad_w, grad_b = loss_and_grad(
                weights, bias, features[idx], one_hot[idx], config.l2
            )
            weights -= rate * grad_w
            bias -= rate * grad_b
        loss, _, _ = loss_and_grad(weights, bias, features, one_hot, config.l2)
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite probe loss")
        if loss > prev_loss:
            weights, bias = saved
            rate *= 0.5
            halvings.append((epoch, rate))
            loss = prev_loss
        prev_loss = loss
        history.append(loss)
    return SoftmaxModel(
        weights=weights,
        bias=bias,
        class_labels=class_labels,
        loss_history=history,
        rate_halvings=halvings,
    )


def predict(model, features):
    """Argmax class per row; ties resolve to the lowest class label."""
    scores = np.asarray(features, dtype=np.float64) @ model.weights + model.bias
    return model.class_labels[np.argmax(scores, axis=1)]


def accuracy(pred, truth):
    """Fraction of exact matches."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError("prediction and truth lengths differ")
    return float(np.mean(pred == truth))


def mean_ci95(values):
    """Mean and 1.96 * sample_std / sqrt(n) (normal approximation)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] < 2:
        raise ValueError("need at least 2 values for a confidence interval")
    half = 1.96 * values.std(ddof=1) / np.sqrt(values.shape[0])
    return float(values.mean()), float(half)
