"""Datasets, IDX file IO, and shard partitioning.

Classification data moves through a small ``Dataset`` container (float
feature matrix, integer labels).  The IDX reader/writer speaks the standard
big-endian format used by the MNIST distribution files: unsigned bytes with
magic 0x00000803 for image tensors and 0x00000801 for label vectors; pixel
bytes are scaled to [0, 1] on load.

Partitions split row indices across nodes.  The IID split deals a shuffled
permutation; the label split deals whole classes round-robin, which is the
pathological heterogeneous case the topology experiments care about.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "Partition",
    "RegressionBundle",
    "load_idx",
    "save_idx",
    "synthetic_classification",
    "synthetic_regression",
    "balanced_holdout",
    "partition_iid",
    "partition_by_label",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    """Row-aligned features (n x d, float64) and integer labels (n,)."""

    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-d, got {self.features.shape}")
        if self.labels.ndim != 1:
            raise ValueError(f"labels must be 1-d, got {self.labels.shape}")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.features.shape[0]} rows vs {self.labels.shape[0]} labels"
            )
        if self.labels.size and self.labels.min() < 0:
            raise ValueError("labels must be nonnegative")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def subset(self, idx: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], name or self.name)


@dataclass
class Partition:
    """Disjoint, non-empty row-index shards covering part of a dataset."""

    shards: tuple

    def __post_init__(self):
        shards = tuple(np.asarray(s, dtype=np.int64) for s in self.shards)
        seen: set[int] = set()
        for k, s in enumerate(shards):
            if s.size == 0:
                raise ValueError(f"shard {k} is empty")
            ids = set(int(i) for i in s)
            if seen & ids:
                raise ValueError(f"shard {k} overlaps an earlier shard")
            seen |= ids
        self.shards = shards

    @property
    def n_shards(self) -> int:
        return len(self.shards)


# -- IDX files ----------------------------------------------------------------


def _read_exact(fh, count: int, what: str) -> bytes:
    buf = fh.read(count)
    if len(buf) != count:
        raise ValueError(f"truncated IDX file: expected {count} bytes of {what}")
    return buf


def load_idx(images_path, labels_path, name: str = "idx") -> Dataset:
    """Read an images/labels IDX pair into a Dataset with features in [0, 1]."""
    with open(images_path, "rb") as fh:
        magic, count, rows, cols = struct.unpack(
            ">iiii", _read_exact(fh, 16, "image header")
        )
        if magic != IDX_IMAGES_MAGIC:
            raise ValueError(
                f"bad magic in {images_path}: 0x{magic:08x}, "
                f"expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        raw = _read_exact(fh, count * rows * cols, "pixels")
        if fh.read(1):
            raise ValueError(f"trailing bytes in {images_path}")
    features = (
        np.frombuffer(raw, dtype=np.uint8)
        .reshape(count, rows * cols)
        .astype(np.float64)
        / 255.0
    )
    with open(labels_path, "rb") as fh:
        magic, label_count = struct.unpack(">ii", _read_exact(fh, 8, "label header"))
        if magic != IDX_LABELS_MAGIC:
            raise ValueError(
                f"bad magic in {labels_path}: 0x{magic:08x}, "
                f"expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        raw = _read_exact(fh, label_count, "labels")
        if fh.read(1):
            raise ValueError(f"trailing bytes in {labels_path}")
    labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)
    if label_count != count:
        raise ValueError(f"count mismatch: {count} images vs {label_count} labels")
    return Dataset(features, labels, name)


def save_idx(ds: Dataset, images_path, labels_path, side: int | None = None) -> None:
    """Write a Dataset as an IDX pair; features must already live in [0, 1].

    Features are quantized to unsigned bytes (round(x * 255)).  ``side``
    fixes the written image height/width; by default the feature width is
    written as a (1 x dims) image.
    """
    feats = ds.features
    if feats.size and (feats.min() < 0.0 or feats.max() > 1.0):
        raise ValueError("features must be within [0, 1] for IDX export")
    if ds.labels.size and ds.labels.max() > 255:
        raise ValueError("labels above 255 cannot be stored as bytes")
    count, dims = feats.shape
    if side is None:
        rows, cols = 1, dims
    else:
        if side * side != dims:
            raise ValueError(f"side {side} does not square to dims {dims}")
        rows = cols = side
    pixels = np.round(feats * 255.0).astype(np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">iiii", IDX_IMAGES_MAGIC, count, rows, cols))
        fh.write(pixels.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">ii", IDX_LABELS_MAGIC, count))
        fh.write(ds.labels.astype(np.uint8).tobytes())


# -- synthetic data -------------------------------------------------------------


def synthetic_classification(
    n_samples: int,
    dims: int,
    classes: int,
    cluster_sep: float,
    seed: int,
) -> Dataset:
    """Gaussian class clusters with unit within-class noise.

    Class centers are drawn so the expected distance between two centers is
    ``cluster_sep``; cluster_sep = 0 collapses all classes onto one blob.
    Labels cycle round-robin, so class counts differ by at most one; rows
    are shuffled.
    """
    if n_samples < classes:
        raise ValueError(f"need n_samples >= classes, got {n_samples} < {classes}")
    if classes < 2 or dims < 1:
        raise ValueError(f"bad shape: dims={dims}, classes={classes}")
    if cluster_sep < 0.0:
        raise ValueError(f"cluster_sep must be >= 0, got {cluster_sep}")
    rng = np.random.default_rng(seed)
    center_scale = cluster_sep / np.sqrt(2.0 * dims)
    centers = rng.standard_normal((classes, dims)) * center_scale
    labels = np.arange(n_samples, dtype=np.int64) % classes
    features = centers[labels] + rng.standard_normal((n_samples, dims))
    order = rng.permutation(n_samples)
    return Dataset(features[order], labels[order], "synthetic-classification")


@dataclass
class RegressionBundle:
    """Non-IID least-squares problem: per-shard feature shifts, shared truth.

    ``shards`` indexes rows of (features, targets); eval rows mix all shard
    distributions evenly, so the evaluation loss measures the global fit.
    """

    features: np.ndarray
    targets: np.ndarray
    shards: tuple
    eval_features: np.ndarray
    eval_targets: np.ndarray
    true_weights: np.ndarray


def synthetic_regression(
    n_shards: int,
    rows_per_shard: int,
    dims: int,
    shard_shift: float,
    noise: float,
    seed: int,
    eval_rows_per_shard: int = 4,
) -> RegressionBundle:
    """Linear data y = x.w + noise with per-shard Gaussian feature centers.

    Every shard draws features around its own center (norm ~ shard_shift),
    so local Hessians differ while the generating weights are shared: the
    heterogeneity shows up in gradients away from the optimum.
    """
    if n_shards < 1 or rows_per_shard < dims:
        raise ValueError(
            f"need rows_per_shard >= dims, got {rows_per_shard} < {dims}"
        )
    rng = np.random.default_rng(seed)
    w_true = rng.standard_normal(dims) / np.sqrt(dims)
    centers = rng.standard_normal((n_shards, dims))
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    centers = centers / np.maximum(norms, 1e-12) * shard_shift
    feats, targs, shards = [], [], []
    start = 0
    for k in range(n_shards):
        x = centers[k] + rng.standard_normal((rows_per_shard, dims))
        y = x @ w_true + noise * rng.standard_normal(rows_per_shard)
        feats.append(x)
        targs.append(y)
        shards.append(np.arange(start, start + rows_per_shard))
        start += rows_per_shard
    ev_x, ev_y = [], []
    for k in range(n_shards):
        x = centers[k] + rng.standard_normal((eval_rows_per_shard, dims))
        ev_x.append(x)
        ev_y.append(x @ w_true + noise * rng.standard_normal(eval_rows_per_shard))
    return RegressionBundle(
        features=np.vstack(feats),
        targets=np.concatenate(targs),
        shards=tuple(shards),
        eval_features=np.vstack(ev_x),
        eval_targets=np.concatenate(ev_y),
        true_weights=w_true,
    )


def balanced_holdout(ds: Dataset, per_class: int, seed: int) -> tuple[Dataset, Dataset]:
    """Split off a test set with exactly ``per_class`` rows of every class."""
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    rng = np.random.default_rng(seed)
    test_idx = []
    for c in range(ds.n_classes):
        rows = np.flatnonzero(ds.labels == c)
        if rows.size < per_class + 1:
            raise ValueError(
                f"class {c} has {rows.size} rows; needs > per_class={per_class}"
            )
        test_idx.append(rng.permutation(rows)[:per_class])
    test_idx = np.sort(np.concatenate(test_idx))
    mask = np.ones(ds.n_rows, dtype=bool)
    mask[test_idx] = False
    train_idx = np.flatnonzero(mask)
    return ds.subset(train_idx, ds.name + "-train"), ds.subset(test_idx, ds.name + "-test")


# -- partitions -----------------------------------------------------------------


def partition_iid(ds: Dataset, n_nodes: int, seed: int) -> Partition:
    """Shuffle rows and deal them out; shard sizes differ by at most one."""
    if n_nodes < 1 or n_nodes > ds.n_rows:
        raise ValueError(f"cannot split {ds.n_rows} rows across {n_nodes} nodes")
    rng = np.random.default_rng(seed)
    order = rng.permutation(ds.n_rows)
    return Partition(tuple(np.sort(s) for s in np.array_split(order, n_nodes)))


def partition_by_label(ds: Dataset, n_nodes: int) -> Partition:
    """Deal whole classes to nodes round-robin (node k gets classes k, k+N, ...).

    With more nodes than classes, the nodes assigned to the same class split
    that class's rows evenly.  Every shard must end up non-empty.
    """
    classes = ds.n_classes
    if classes < 1:
        raise ValueError("dataset has no labels to partition by")
    counts = np.bincount(ds.labels, minlength=classes)
    if (counts == 0).any():
        missing = int(np.flatnonzero(counts == 0)[0])
        raise ValueError(f"class {missing} has zero rows")
    buckets: list[list[np.ndarray]] = [[] for _ in range(n_nodes)]
    if n_nodes <= classes:
        for c in range(classes):
            buckets[c % n_nodes].append(np.flatnonzero(ds.labels == c))
    else:
        for c in range(classes):
            owners = [k for k in range(n_nodes) if k % classes == c]
            rows = np.flatnonzero(ds.labels == c)
            for owner, chunk in zip(owners, np.array_split(rows, len(owners))):
                buckets[owner].append(chunk)
    shards = []
    for k, parts in enumerate(buckets):
        if not parts or sum(p.size for p in parts) == 0:
            raise ValueError(f"node {k} received an empty shard")
        shards.append(np.sort(np.concatenate(parts)))
    return Partition(tuple(shards))
