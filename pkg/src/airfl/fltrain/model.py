"""Linear classifiers/regressors trained by federated gradient descent."""

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax, softmax

from airfl.errors import DimensionMismatch, EmptyTestSet


class LossKind(str, enum.Enum):
    CROSS_ENTROPY = "cross_entropy"
    LEAST_SQUARES = "least_squares"


@dataclass
class LinearModel:
    """Scores ``W u`` with ``W`` of shape (num_classes, num_features).

    ``reg`` is the ridge weight; it is part of every local loss so the
    global loss stays the size-weighted mean of local losses.
    """

    weights: np.ndarray
    loss_kind: LossKind = LossKind.CROSS_ENTROPY
    reg: float = 0.0

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        self.loss_kind = LossKind(self.loss_kind)
        if self.reg < 0:
            raise ValueError("reg must be nonnegative")

    @classmethod
    def zeros(cls, num_classes, num_features, loss_kind=LossKind.CROSS_ENTROPY, reg=0.0):
        return cls(np.zeros((num_classes, num_features)), loss_kind, reg)

    @property
    def num_classes(self):
        return self.weights.shape[0]

    @property
    def num_features(self):
        return self.weights.shape[1]

    @property
    def dim(self):
        return self.weights.size

    def flat(self):
        return self.weights.reshape(-1).copy()

    def with_flat(self, w):
        w = np.asarray(w, dtype=float)
        if w.size != self.dim:
            raise DimensionMismatch(f"expected {self.dim} parameters, got {w.size}")
        return LinearModel(w.reshape(self.weights.shape), self.loss_kind, self.reg)

    def scores(self, features):
        features = np.atleast_2d(features)
        if features.shape[1] != self.num_features:
            raise DimensionMismatch(f"model takes {self.num_features} features, got {features.shape[1]}")
        return features @ self.weights.T

    def _targets(self, shard):
        if self.loss_kind is LossKind.LEAST_SQUARES:
            t = shard.regression_targets(self.num_classes)
        else:
            t = np.zeros((shard.size, self.num_classes))
            t[np.arange(shard.size), shard.labels] = 1.0
        return t

    def loss(self, shard):
        z = self.scores(shard.features)
        t = self._targets(shard)
        if self.loss_kind is LossKind.LEAST_SQUARES:
            data = 0.5 * float(np.mean(np.sum((z - t) ** 2, axis=1)))
        else:
            data = -float(np.mean(np.sum(t * log_softmax(z, axis=1), axis=1)))
        return data + 0.5 * self.reg * float(np.sum(self.weights**2))

    def gradient(self, shard):
        """Mean-form gradient (1/K) Σ ∇ℓ, flattened row-major like ``weights``."""
        z = self.scores(shard.features)
        t = self._targets(shard)
        resid = z - t if self.loss_kind is LossKind.LEAST_SQUARES else softmax(z, axis=1) - t
        grad = resid.T @ np.atleast_2d(shard.features) / shard.size + self.reg * self.weights
        return grad.reshape(-1)


def local_gradient(model, shard):
    return model.gradient(shard)


def evaluate_accuracy(model, test):
    if test is None or test.size == 0:
        raise EmptyTestSet("accuracy needs at least one test sample")
    pred = np.argmax(model.scores(test.features), axis=1)
    return float(np.mean(pred == test.labels))


def global_loss(model, shards):
    """Size-weighted mean of local losses, i.e. the pooled-data loss."""
    sizes = np.array([s.size for s in shards], dtype=float)
    losses = np.array([model.loss(s) for s in shards])
    return float(sizes @ losses / sizes.sum())
