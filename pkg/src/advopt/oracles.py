"""Built-in differentiable objectives.

Concave quadratics with a closed-form constrained maximizer serve the
convergence measurements; a softmax-linear classifier and a one-hidden-
layer rectifier network with hand-written backprop serve the desk-scale
attack and transfer experiments.  Everything is deliberately tiny so a
whole experiment suite runs in seconds.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .core import FeasibleBox, Vector, as_vector
from .projection import clip_box

log = logging.getLogger(__name__)

__all__ = [
    "ConcaveQuadratic",
    "LinearModel",
    "MlpModel",
    "ModelOracle",
    "SyntheticDataset",
    "train_model",
    "fd_gradient",
]


class ConcaveQuadratic:
    """J(x) = -0.5 * sum_i h_i (x_i - c_i)^2 with every h_i > 0.

    Separable and concave, so the maximizer over any box is the box
    projection of the center, with value 0 when the center is feasible.
    """

    def __init__(self, center, curvature):
        self.center = as_vector(center)
        self.curvature = as_vector(curvature)
        if self.center.shape != self.curvature.shape:
            raise ValueError("center and curvature must share one dimension")
        if np.any(self.curvature <= 0):
            raise ValueError("curvature must be positive coordinate-wise")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def evaluate(self, x: Vector) -> tuple[float, Vector]:
        d = x - self.center
        return float(-0.5 * np.dot(self.curvature * d, d)), -self.curvature * d

    def optimum_in(self, box: FeasibleBox) -> tuple[Vector, float]:
        x_star = clip_box(box, self.center)
        return x_star, self.evaluate(x_star)[0]

    @classmethod
    def random(cls, rng: np.random.Generator, dim: int,
               center_lo: float = -0.8, center_hi: float = 0.8,
               curv_lo: float = 0.5, curv_hi: float = 2.0) -> "ConcaveQuadratic":
        return cls(rng.uniform(center_lo, center_hi, dim),
                   rng.uniform(curv_lo, curv_hi, dim))


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    return logits - m - np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))


class LinearModel:
    """Multinomial logistic regression: logits = W x + b, cross-entropy loss."""

    kind = "linear"

    def __init__(self, weights, bias):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError("weights must be (classes, features), bias (classes,)")

    @property
    def classes(self) -> int:
        return self.weights.shape[0]

    @property
    def features(self) -> int:
        return self.weights.shape[1]

    def logits(self, x: Vector) -> np.ndarray:
        return self.weights @ x + self.bias

    def logits_batch(self, xs: np.ndarray) -> np.ndarray:
        return xs @ self.weights.T + self.bias

    def predict(self, x: Vector) -> int:
        return int(np.argmax(self.logits(x)))

    def predict_batch(self, xs: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits_batch(xs), axis=1)

    def accuracy(self, xs: np.ndarray, ys: np.ndarray) -> float:
        return float(np.mean(self.predict_batch(xs) == ys))

    def loss_and_input_grad(self, x: Vector, y: int) -> tuple[float, Vector]:
        if not 0 <= y < self.classes:
            raise ValueError(f"label {y} outside [0, {self.classes})")
        logp = _log_softmax(self.logits(x))
        p = np.exp(logp)
        p[y] -= 1.0
        return float(-logp[y]), self.weights.T @ p

    @classmethod
    def init(cls, rng: np.random.Generator, features: int, classes: int) -> "LinearModel":
        return cls(0.01 * rng.standard_normal((classes, features)), np.zeros(classes))


class MlpModel:
    """One rectifier hidden layer, cross-entropy loss, analytic backprop.

    The rectifier subgradient at exactly zero preactivation is 0.
    """

    kind = "mlp"

    def __init__(self, w1, b1, w2, b2):
        self.w1 = np.asarray(w1, dtype=np.float64)
        self.b1 = np.asarray(b1, dtype=np.float64)
        self.w2 = np.asarray(w2, dtype=np.float64)
        self.b2 = np.asarray(b2, dtype=np.float64)
        if self.w1.ndim != 2 or self.w2.ndim != 2 or self.w2.shape[1] != self.w1.shape[0]:
            raise ValueError("expected w1 (hidden, features) and w2 (classes, hidden)")

    @property
    def classes(self) -> int:
        return self.w2.shape[0]

    @property
    def features(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    def logits(self, x: Vector) -> np.ndarray:
        return self.w2 @ np.maximum(self.w1 @ x + self.b1, 0.0) + self.b2

    def logits_batch(self, xs: np.ndarray) -> np.ndarray:
        return np.maximum(xs @ self.w1.T + self.b1, 0.0) @ self.w2.T + self.b2

    def predict(self, x: Vector) -> int:
        return int(np.argmax(self.logits(x)))

    def predict_batch(self, xs: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits_batch(xs), axis=1)

    def accuracy(self, xs: np.ndarray, ys: np.ndarray) -> float:
        return float(np.mean(self.predict_batch(xs) == ys))

    def preactivation_margin(self, x: Vector) -> float:
        """Smallest |hidden preactivation|; small values flag kink-adjacent
        points where finite differences disagree with the subgradient."""
        return float(np.abs(self.w1 @ x + self.b1).min())

    def loss_and_input_grad(self, x: Vector, y: int) -> tuple[float, Vector]:
        if not 0 <= y < self.classes:
            raise ValueError(f"label {y} outside [0, {self.classes})")
        z1 = self.w1 @ x + self.b1
        a1 = np.maximum(z1, 0.0)
        logp = _log_softmax(self.w2 @ a1 + self.b2)
        p = np.exp(logp)
        p[y] -= 1.0
        da1 = self.w2.T @ p
        dz1 = np.where(z1 > 0.0, da1, 0.0)
        return float(-logp[y]), self.w1.T @ dz1

    @classmethod
    def init(cls, rng: np.random.Generator, features: int, classes: int,
             hidden: int = 32) -> "MlpModel":
        w1 = rng.standard_normal((hidden, features)) / np.sqrt(features)
        w2 = rng.standard_normal((classes, hidden)) / np.sqrt(hidden)
        return cls(w1, np.zeros(hidden), w2, np.zeros(classes))


class ModelOracle:
    """Adapts a classifier plus a fixed true label to the oracle contract.

    The loss ascends toward misclassification of that label.
    """

    def __init__(self, model, label: int):
        self.model = model
        self.label = int(label)

    @property
    def dim(self) -> int:
        return self.model.features

    def evaluate(self, x: Vector) -> tuple[float, Vector]:
        return self.model.loss_and_input_grad(x, self.label)


@dataclass
class SyntheticDataset:
    """Gaussian-blob classification samples in [0, 1]^d, one blob per class."""

    x: np.ndarray
    y: np.ndarray
    classes: int
    seed: int | None = None

    @property
    def samples(self) -> int:
        return self.x.shape[0]

    @property
    def features(self) -> int:
        return self.x.shape[1]

    @classmethod
    def blobs(cls, seed: int, samples: int, features: int, classes: int,
              spread: float = 0.1, center_lo: float = 0.3,
              center_hi: float = 0.7) -> "SyntheticDataset":
        rng = np.random.default_rng(seed)
        centers = rng.uniform(center_lo, center_hi, (classes, features))
        y = rng.integers(0, classes, samples)
        x = np.clip(centers[y] + spread * rng.standard_normal((samples, features)),
                    0.0, 1.0)
        return cls(x=x, y=y.astype(np.int64), classes=classes, seed=seed)

    def to_csv(self, path) -> None:
        """One row per sample: feature values then the integer label."""
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            for xi, yi in zip(self.x, self.y):
                writer.writerow([repr(float(v)) for v in xi] + [int(yi)])

    @classmethod
    def from_csv(cls, path) -> "SyntheticDataset":
        feats, labels = [], []
        with open(path, newline="") as f:
            for row in csv.reader(f):
                if not row:
                    continue
                feats.append([float(v) for v in row[:-1]])
                labels.append(int(row[-1]))
        if not feats:
            raise ValueError(f"dataset file {path} is empty")
        y = np.asarray(labels, dtype=np.int64)
        return cls(x=np.asarray(feats, dtype=np.float64), y=y,
                   classes=int(y.max()) + 1, seed=None)


def train_model(dataset: SyntheticDataset, kind: str, rng: np.random.Generator,
                hidden: int = 32, lr: float = 0.5, epochs: int | None = None):
    """Fit a classifier to the dataset by full-batch gradient descent.

    Deterministic given the rng.  Returns the model with a
    ``train_accuracy`` attribute attached; an accuracy below 0.9 is
    logged as a warning, not raised.
    """
    xs, ys, classes = dataset.x, dataset.y, dataset.classes
    n = xs.shape[0]
    if n == 0:
        raise ValueError("dataset is empty")
    onehot = np.eye(classes)[ys]

    if kind == "linear":
        epochs = 300 if epochs is None else epochs
        model = LinearModel.init(rng, dataset.features, classes)
        for _ in range(epochs):
            p = np.exp(_log_softmax(model.logits_batch(xs)))
            gl = (p - onehot) / n
            model.weights -= lr * (gl.T @ xs)
            model.bias -= lr * gl.sum(axis=0)
    elif kind == "mlp":
        epochs = 400 if epochs is None else epochs
        model = MlpModel.init(rng, dataset.features, classes, hidden)
        for _ in range(epochs):
            z1 = xs @ model.w1.T + model.b1
            a1 = np.maximum(z1, 0.0)
            p = np.exp(_log_softmax(a1 @ model.w2.T + model.b2))
            gl = (p - onehot) / n
            ga1 = gl @ model.w2
            gz1 = np.where(z1 > 0.0, ga1, 0.0)
            model.w2 -= lr * (gl.T @ a1)
            model.b2 -= lr * gl.sum(axis=0)
            model.w1 -= lr * (gz1.T @ xs)
            model.b1 -= lr * gz1.sum(axis=0)
    else:
        raise ValueError(f"unknown model kind {kind!r}; expected linear or mlp")

    model.train_accuracy = model.accuracy(xs, ys)
    if model.train_accuracy < 0.9:
        log.warning("%s model reached only %.3f training accuracy after %d epochs",
                    kind, model.train_accuracy, epochs)
    return model


def fd_gradient(oracle, x: Vector, hstep: float = 1e-5) -> Vector:
    """Central-difference gradient estimate, one coordinate at a time."""
    if not hstep > 0:
        raise ValueError("hstep must be > 0")
    x = as_vector(x)
    out = np.empty_like(x)
    probe = x.copy()
    for i in range(x.shape[0]):
        probe[i] = x[i] + hstep
        up, _ = oracle.evaluate(probe)
        probe[i] = x[i] - hstep
        down, _ = oracle.evaluate(probe)
        probe[i] = x[i]
        out[i] = (up - down) / (2.0 * hstep)
    return out
