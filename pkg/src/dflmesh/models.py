"""Training objectives: least squares, logistic regression, one-hidden-layer MLP.

A model family is stateless with respect to data: ``loss``/``grad`` take the
flat parameter vector plus an explicit (features, labels) pair, so the same
family serves per-node shards and the shared evaluation set.  A
``LocalObjective`` binds a family to one node's shard and adds mini-batch
indexing, which is what the training engine consumes.

All gradients are exact (closed form / backprop) and are held to central
finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LeastSquares",
    "LogisticRegression",
    "TanhMlp",
    "LocalObjective",
    "least_squares",
    "logistic_regression",
    "mlp_classifier",
    "accuracy",
    "least_squares_optimum",
]


def _as_2d(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"features must be 2-d, got shape {x.shape}")
    return x


class LeastSquares:
    """f(w) = ||X w - y||^2 / (2 rows); targets are real-valued."""

    is_classifier = False

    def __init__(self, dims: int):
        if dims < 1:
            raise ValueError(f"need dims >= 1, got {dims}")
        self.dims = dims

    @property
    def param_count(self) -> int:
        return self.dims

    def loss(self, w: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
        x = _as_2d(x)
        r = x @ w - y
        return float(r @ r / (2.0 * x.shape[0]))

    def grad(self, w: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = _as_2d(x)
        return x.T @ (x @ w - y) / x.shape[0]

    def per_sample_grads(self, w, x, y) -> np.ndarray:
        x = _as_2d(x)
        return x * (x @ w - y)[:, None]

    def smoothness(self, x: np.ndarray) -> float:
        """Exact Lipschitz constant of the gradient: lambda_max(X^T X) / rows."""
        x = _as_2d(x)
        return float(np.linalg.eigvalsh(x.T @ x)[-1] / x.shape[0])

    def init_params(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(self.dims)
        return rng.uniform(-bound, bound, size=self.dims)


def least_squares_optimum(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Normal-equations minimizer and its loss; the convex reference oracle."""
    x = _as_2d(x)
    w, *_ = np.linalg.lstsq(x, y, rcond=None)
    model = LeastSquares(x.shape[1])
    return w, model.loss(w, x, y)


class LogisticRegression:
    """Binary cross-entropy with optional L2: labels in {0, 1}, no intercept."""

    is_classifier = True

    def __init__(self, dims: int, l2: float = 0.0):
        if dims < 1:
            raise ValueError(f"need dims >= 1, got {dims}")
        if l2 < 0.0:
            raise ValueError(f"l2 must be >= 0, got {l2}")
        self.dims = dims
        self.l2 = l2

    @property
    def param_count(self) -> int:
        return self.dims

    @staticmethod
    def _check_labels(y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if y.size and not np.isin(y, (0, 1)).all():
            raise ValueError("logistic labels must be 0 or 1")
        return y.astype(np.float64)

    def loss(self, w, x, y) -> float:
        x = _as_2d(x)
        yf = self._check_labels(y)
        z = x @ w
        # mean of log(1 + e^z) - y z, computed stably
        ce = float(np.mean(np.logaddexp(0.0, z) - yf * z))
        return ce + 0.5 * self.l2 * float(w @ w)

    def grad(self, w, x, y) -> np.ndarray:
        x = _as_2d(x)
        yf = self._check_labels(y)
        p = 1.0 / (1.0 + np.exp(-(x @ w)))
        return x.T @ (p - yf) / x.shape[0] + self.l2 * w

    def per_sample_grads(self, w, x, y) -> np.ndarray:
        x = _as_2d(x)
        yf = self._check_labels(y)
        p = 1.0 / (1.0 + np.exp(-(x @ w)))
        return x * (p - yf)[:, None] + self.l2 * w

    def predict(self, w, x) -> np.ndarray:
        x = _as_2d(x)
        return (x @ w > 0.0).astype(np.int64)

    def smoothness(self, x: np.ndarray) -> float:
        x = _as_2d(x)
        return float(np.linalg.eigvalsh(x.T @ x)[-1] / (4.0 * x.shape[0]) + self.l2)

    def init_params(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(self.dims)
        return rng.uniform(-bound, bound, size=self.dims)


class TanhMlp:
    """One tanh hidden layer, softmax cross-entropy output.

    Parameters are packed flat as [W1 (in x h), b1 (h), W2 (h x c), b2 (c)].
    """

    is_classifier = True

    def __init__(self, in_dim: int, hidden: int, classes: int):
        if min(in_dim, hidden) < 1 or classes < 2:
            raise ValueError(
                f"bad MLP shape: in_dim={in_dim}, hidden={hidden}, classes={classes}"
            )
        self.in_dim = in_dim
        self.hidden = hidden
        self.classes = classes

    @property
    def param_count(self) -> int:
        return (self.in_dim + 1) * self.hidden + (self.hidden + 1) * self.classes

    def _unpack(self, w: np.ndarray):
        d, h, c = self.in_dim, self.hidden, self.classes
        if w.shape != (self.param_count,):
            raise ValueError(f"expected {self.param_count} params, got {w.shape}")
        o = 0
        w1 = w[o : o + d * h].reshape(d, h)
        o += d * h
        b1 = w[o : o + h]
        o += h
        w2 = w[o : o + h * c].reshape(h, c)
        o += h * c
        b2 = w[o : o + c]
        return w1, b1, w2, b2

    def _forward(self, w, x):
        w1, b1, w2, b2 = self._unpack(w)
        hidden = np.tanh(x @ w1 + b1)
        logits = hidden @ w2 + b2
        return hidden, logits

    @staticmethod
    def _log_softmax(logits: np.ndarray) -> np.ndarray:
        shifted = logits - logits.max(axis=1, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

    def loss(self, w, x, y) -> float:
        x = _as_2d(x)
        y = np.asarray(y, dtype=np.int64)
        _, logits = self._forward(w, x)
        logp = self._log_softmax(logits)
        return float(-logp[np.arange(x.shape[0]), y].mean())

    def grad(self, w, x, y) -> np.ndarray:
        x = _as_2d(x)
        y = np.asarray(y, dtype=np.int64)
        rows = x.shape[0]
        w1, b1, w2, b2 = self._unpack(w)
        hidden = np.tanh(x @ w1 + b1)
        logits = hidden @ w2 + b2
        p = np.exp(self._log_softmax(logits))
        p[np.arange(rows), y] -= 1.0
        p /= rows
        g_w2 = hidden.T @ p
        g_b2 = p.sum(axis=0)
        back = (p @ w2.T) * (1.0 - hidden**2)
        g_w1 = x.T @ back
        g_b1 = back.sum(axis=0)
        return np.concatenate(
            [g_w1.ravel(), g_b1, g_w2.ravel(), g_b2]
        )

    def predict(self, w, x) -> np.ndarray:
        x = _as_2d(x)
        _, logits = self._forward(w, x)
        return logits.argmax(axis=1)

    def init_params(self, seed: int) -> np.ndarray:
        """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per layer, biases zero."""
        rng = np.random.default_rng(seed)
        d, h, c = self.in_dim, self.hidden, self.classes
        w1 = rng.uniform(-1, 1, size=(d, h)) / np.sqrt(d)
        w2 = rng.uniform(-1, 1, size=(h, c)) / np.sqrt(h)
        return np.concatenate(
            [w1.ravel(), np.zeros(h), w2.ravel(), np.zeros(c)]
        )


@dataclass
class LocalObjective:
    """A model family bound to one node's data shard, with batch indexing."""

    model: object
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = _as_2d(self.features)
        self.labels = np.asarray(self.labels)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.features.shape[0]} feature rows vs "
                f"{self.labels.shape[0]} labels"
            )
        if self.features.shape[0] == 0:
            raise ValueError("empty shard")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def param_count(self) -> int:
        return self.model.param_count

    def _select(self, idx):
        if idx is None:
            return self.features, self.labels
        return self.features[idx], self.labels[idx]

    def loss(self, w, idx=None) -> float:
        x, y = self._select(idx)
        return self.model.loss(w, x, y)

    def grad(self, w, idx=None) -> np.ndarray:
        x, y = self._select(idx)
        return self.model.grad(w, x, y)


def least_squares(x: np.ndarray, y: np.ndarray) -> LocalObjective:
    return LocalObjective(LeastSquares(_as_2d(x).shape[1]), x, y)


def logistic_regression(x: np.ndarray, y: np.ndarray, l2: float = 0.0) -> LocalObjective:
    return LocalObjective(LogisticRegression(_as_2d(x).shape[1], l2=l2), x, y)


def mlp_classifier(in_dim: int, hidden: int, classes: int) -> TanhMlp:
    return TanhMlp(in_dim, hidden, classes)


def accuracy(model, w: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """Fraction of argmax predictions matching integer labels."""
    if not getattr(model, "is_classifier", False):
        raise ValueError(f"{type(model).__name__} is not a classifier")
    pred = model.predict(w, x)
    y = np.asarray(y)
    if pred.shape != y.shape:
        raise ValueError(f"prediction shape {pred.shape} vs labels {y.shape}")
    return float((pred == y).mean())
