"""Per-node datasets and the label-sorted non-IID split."""

from dataclasses import dataclass

import numpy as np

from airfl.errors import DimensionMismatch, IndivisibleSharding


@dataclass
class DataShard:
    features: np.ndarray
    labels: np.ndarray
    targets: np.ndarray = None  # real-valued regression targets (K, C); one-hot labels otherwise

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.features.shape[0] != self.labels.size:
            raise DimensionMismatch("features and labels disagree on the number of samples")
        if self.targets is not None:
            self.targets = np.asarray(self.targets, dtype=float)
            if self.targets.ndim == 1:
                self.targets = self.targets[:, None]
            if self.targets.shape[0] != self.labels.size:
                raise DimensionMismatch("targets and labels disagree on the number of samples")

    @property
    def size(self):
        return self.labels.size

    def regression_targets(self, num_outputs):
        if self.targets is not None:
            if self.targets.shape[1] != num_outputs:
                raise DimensionMismatch(f"targets have {self.targets.shape[1]} columns, model {num_outputs}")
            return self.targets
        onehot = np.zeros((self.size, num_outputs))
        onehot[np.arange(self.size), self.labels] = 1.0
        return onehot


def pool_shards(shards):
    """Union of several shards as one shard."""
    targets = None
    if all(s.targets is not None for s in shards):
        targets = np.concatenate([s.targets for s in shards])
    return DataShard(
        np.concatenate([s.features for s in shards]), np.concatenate([s.labels for s in shards]), targets
    )


def shard_noniid(features, labels, num_shards, shards_per_node, num_nodes, rng):
    """Sort by label, cut into equal contiguous shards, deal them out at random.

    A stable sort keeps ties in input order, so results depend only on the
    data and ``rng``.
    """
    features = np.atleast_2d(np.asarray(features))
    labels = np.asarray(labels).reshape(-1)
    if features.shape[0] != labels.size:
        raise DimensionMismatch("features and labels disagree on the number of samples")
    if num_nodes * shards_per_node != num_shards:
        raise IndivisibleSharding(f"{num_nodes} nodes x {shards_per_node} shards != {num_shards} shards")
    if num_shards < 1 or labels.size % num_shards:
        raise IndivisibleSharding(f"{labels.size} samples do not split into {num_shards} equal shards")
    order = np.argsort(labels, kind="stable")
    pieces = order.reshape(num_shards, -1)
    assignment = rng.permutation(num_shards).reshape(num_nodes, shards_per_node)
    shards = []
    for ids in assignment:
        idx = pieces[np.sort(ids)].reshape(-1)
        shards.append(DataShard(features[idx], labels[idx]))
    return shards


def class_balanced_subsample(features, labels, total, rng):
    """Draw ``total`` samples with (as near as possible) equal counts per class."""
    labels = np.asarray(labels).reshape(-1)
    classes = np.unique(labels)
    base, extra = divmod(total, classes.size)
    picks = []
    for j, c in enumerate(classes):
        pool = np.flatnonzero(labels == c)
        want = base + (1 if j < extra else 0)
        if want > pool.size:
            raise ValueError(f"class {c} has only {pool.size} samples, {want} requested")
        picks.append(rng.choice(pool, size=want, replace=False))
    idx = np.sort(np.concatenate(picks))
    return np.asarray(features)[idx], labels[idx]
