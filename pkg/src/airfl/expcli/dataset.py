"""MNIST loading: official IDX files when available, else a bundled subset."""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from mlxtend.data import mnist_data

from airfl.errors import DimensionMismatch, MissingFile
from airfl.expcli.idx import read_idx
from airfl.fltrain import DataShard, class_balanced_subsample

log = logging.getLogger(__name__)

IDX_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


@dataclass
class Dataset:
    train_x: np.ndarray  # (K, 784) in [0, 1]
    train_y: np.ndarray
    test: DataShard
    source: str


def find_idx_files(directory):
    """Map each IDX role to an existing file (plain or ``.gz``) in ``directory``."""
    directory = Path(directory)
    found = {}
    for role, stem in IDX_FILES.items():
        for name in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
            if (directory / name).is_file():
                found[role] = directory / name
                break
        else:
            raise MissingFile(f"{stem} not found in {directory}")
    return found


def load_idx_directory(directory):
    files = find_idx_files(directory)
    arrays = {role: read_idx(path)[1] for role, path in files.items()}
    for split in ("train", "test"):
        images, labels = arrays[f"{split}_images"], arrays[f"{split}_labels"]
        if images.shape[0] != labels.shape[0]:
            raise DimensionMismatch(f"{split}: {images.shape[0]} images but {labels.shape[0]} labels")
    flat = {k: v.reshape(v.shape[0], -1) if v.ndim == 3 else v for k, v in arrays.items()}
    return flat["train_images"], flat["train_labels"], flat["test_images"], flat["test_labels"]


def _bundled_split(train_size, test_size, rng):
    """Disjoint, class-balanced train/test split of the 5000-image bundled subset."""
    x, y = mnist_data()
    classes = np.unique(y)
    if train_size % classes.size or test_size % classes.size:
        raise ValueError("bundled split needs sizes divisible by the number of classes")
    per_tr, per_te = train_size // classes.size, test_size // classes.size
    tr, te = [], []
    for c in classes:
        pool = rng.permutation(np.flatnonzero(y == c))
        if per_tr + per_te > pool.size:
            raise ValueError(f"bundled subset has {pool.size} images of class {c}")
        tr.append(pool[:per_tr])
        te.append(pool[per_tr : per_tr + per_te])
    tr, te = np.sort(np.concatenate(tr)), np.sort(np.concatenate(te))
    return x[tr], y[tr], x[te], y[te]


def load_dataset(settings):
    """Train features/labels and a test shard as described by ``DatasetSettings``."""
    rng = np.random.default_rng(settings.subsample_seed)
    if settings.path:
        tx, ty, vx, vy = load_idx_directory(settings.path)
        source = f"idx:{settings.path}"
        if settings.desk_scale:
            tx, ty = class_balanced_subsample(tx, ty, settings.train_size, rng)
            vx, vy = class_balanced_subsample(vx, vy, settings.test_size, rng)
    else:
        if not settings.desk_scale:
            raise MissingFile("full-scale mode needs dataset.path pointing at the MNIST IDX files")
        tx, ty, vx, vy = _bundled_split(settings.train_size, settings.test_size, rng)
        source = "bundled-5000"
    log.info("dataset %s: %d train / %d test", source, len(ty), len(vy))
    scale = 1.0 / 255.0
    return Dataset(
        train_x=np.asarray(tx, dtype=float) * scale,
        train_y=np.asarray(ty, dtype=np.int64),
        test=DataShard(np.asarray(vx, dtype=float) * scale, np.asarray(vy, dtype=np.int64)),
        source=source,
    )
