"""Synthetic classification data and its CSV on-disk form.

Datasets are Gaussian blobs: one spherical cluster per class, means drawn
uniformly from the unit sphere surface, points sampled around them with a
shared isotropic spread. CSV files store features then a trailing integer
label per row; floats are written with repr so a write/read round trip is
bit-exact.
"""

from __future__ import annotations

import numpy as np

from .numerics import as_labels, as_matrix


class Dataset:
    """Feature matrix plus aligned integer labels, both read-only."""

    def __init__(self, features, labels, num_classes=None):
        feats = as_matrix(features, "features")
        raw = np.ascontiguousarray(labels, dtype=np.int64)
        if raw.ndim != 1 or raw.shape[0] != feats.shape[0]:
            raise ValueError(
                f"need one label per row, got shape {raw.shape} labels for "
                f"{feats.shape[0]} rows"
            )
        inferred = int(raw.max()) + 1
        self.num_classes = int(num_classes) if num_classes is not None else inferred
        labs = as_labels(raw, self.num_classes)
        self.features = feats.copy()
        self.labels = labs.copy()
        self.features.flags.writeable = False
        self.labels.flags.writeable = False

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def make_blobs(num_classes, per_class, dim, spread, seed) -> Dataset:
    """Spherical Gaussian clusters with unit-sphere means.

    spread is the per-coordinate standard deviation; zero collapses each
    class onto its mean, which is handy for separability checks.
    """
    if num_classes < 1 or per_class < 1 or dim < 1:
        raise ValueError(
            f"num_classes, per_class, dim must be >= 1, got "
            f"{num_classes}, {per_class}, {dim}"
        )
    if spread < 0.0:
        raise ValueError(f"spread must be >= 0, got {spread}")
    rng = np.random.default_rng(seed)
    # Normalized Gaussian draws are uniform on the sphere surface.
    means = rng.normal(size=(num_classes, dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    features = np.empty((num_classes * per_class, dim))
    labels = np.empty(num_classes * per_class, dtype=np.int64)
    for c in range(num_classes):
        rows = slice(c * per_class, (c + 1) * per_class)
        features[rows] = means[c] + spread * rng.normal(size=(per_class, dim))
        labels[rows] = c
    order = rng.permutation(features.shape[0])
    return Dataset(features[order], labels[order], num_classes=num_classes)


def split(dataset: Dataset, train_fraction: float, seed) -> tuple:
    """Shuffled (train, test) split; train gets int(frac * N) rows."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(dataset)
    order = np.random.default_rng(seed).permutation(n)
    cut = int(train_fraction * n)
    if cut == 0 or cut == n:
        raise ValueError(f"split of {n} rows at {train_fraction} leaves a side empty")
    train_idx, test_idx = order[:cut], order[cut:]
    k = dataset.num_classes
    return (
        Dataset(dataset.features[train_idx], dataset.labels[train_idx], num_classes=k),
        Dataset(dataset.features[test_idx], dataset.labels[test_idx], num_classes=k),
    )


def save_csv(dataset: Dataset, path, header: bool = False) -> None:
    """Write feature columns then the label column; repr keeps floats exact."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            cols = [f"x{i}" for i in range(dataset.dim)] + ["label"]
            fh.write(",".join(cols) + "\n")
        for row, label in zip(dataset.features, dataset.labels):
            cells = [repr(float(v)) for v in row]
            cells.append(str(int(label)))
            fh.write(",".join(cells) + "\n")


def load_csv(path, num_classes=None, skip_header: bool = False) -> Dataset:
    """Inverse of ``save_csv``; parse errors name the offending line."""
    features = []
    labels = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno == 1 and skip_header:
                continue
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) < 2:
                raise ValueError(f"{path}:{lineno}: need features plus a label")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ValueError(
                    f"{path}:{lineno}: expected {width} columns, found {len(cells)}"
                )
            try:
                features.append([float(c) for c in cells[:-1]])
                label = int(cells[-1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: unparseable cell") from None
            if label < 0 or (num_classes is not None and label >= num_classes):
                raise ValueError(
                    f"{path}:{lineno}: label {label} out of range"
                    + (f" for {num_classes} classes" if num_classes else "")
                )
            labels.append(label)
    if not features:
        raise ValueError(f"{path}: no data rows")
    return Dataset(np.array(features), np.array(labels), num_classes=num_classes)
