"""Tabular and toy-image datasets: loading, [0, 1] scaling, splitting, batching."""
import csv
import logging
import math
import struct
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .augment import Batch, one_hot
from .exceptions import (
    ConfigError,
    EmptyDatasetError,
    MalformedImageFileError,
    NonNumericFeatureError,
)
from .rng import permutation

logger = logging.getLogger(__name__)

IMAGE_MAGIC = b"MWHI"
LABEL_MAGIC = b"LBLS"


@dataclass
class TabularDataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    feature_names: list = field(default_factory=list)
    class_names: list = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on the sample count")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"label ids must lie in 0..{self.n_classes - 1}")

    def __len__(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def subset(self, idx):
        return replace(self, features=self.features[idx], labels=self.labels[idx])


def _is_float(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, label_column=-1):
    """Read a comma-separated file with an optional header row.

    ``label_column`` is a column name (requires a header) or an integer
    index. Class labels are mapped to dense ids in order of first
    appearance. Rows with non-numeric features are rejected together and
    reported by their 1-based line number.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with path.open(newline="") as fh:
        rows = [(k + 1, r) for k, r in enumerate(csv.reader(fh)) if any(c.strip() for c in r)]
    if not rows:
        raise EmptyDatasetError(f"{path} contains no rows")

    first = [c.strip() for c in rows[0][1]]
    ncol = len(first)
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if label_column not in first:
            raise ConfigError(f"label column {label_column!r} not found in header of {path}")
        label_idx = first.index(label_column)
        has_header = True
    else:
        label_idx = int(label_column) % ncol
        has_header = not all(_is_float(c) for j, c in enumerate(first) if j != label_idx)
    header = first if has_header else None
    body = rows[1:] if has_header else rows
    if not body:
        raise EmptyDatasetError(f"{path} has a header but no data rows")

    feats, raw_labels, bad = [], [], []
    for lineno, row in body:
        cells = [c.strip() for c in row]
        if len(cells) != ncol:
            bad.append(lineno)
            continue
        try:
            feats.append([float(c) for j, c in enumerate(cells) if j != label_idx])
        except ValueError:
            bad.append(lineno)
            continue
        raw_labels.append(cells[label_idx])
    if bad:
        raise NonNumericFeatureError(
            f"{path}: unparseable or ragged rows at line(s) {', '.join(map(str, bad))}", rows=bad
        )

    class_names = list(dict.fromkeys(raw_labels))
    ids = {name: k for k, name in enumerate(class_names)}
    names = [h for j, h in enumerate(header) if j != label_idx] if header else []
    return TabularDataset(
        features=np.array(feats),
        labels=np.array([ids[s] for s in raw_labels]),
        n_classes=len(class_names),
        feature_names=names,
        class_names=class_names,
    )


def iris_path():
    return resources.files("mwh") / "datasets" / "iris.csv"


def load_iris():
    with resources.as_file(iris_path()) as p:
        return load_csv(p, label_column="species")


class UnitScaler(TransformerMixin, BaseEstimator):
    """Per-column (x - min) / (max - min) fitted on training rows only.

    Columns that are constant in the fitted data map to 0 everywhere.
    Unseen data is not clipped, so test values may leave [0, 1].
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.data_min_ = X.min(axis=0)
        self.data_range_ = X.max(axis=0) - self.data_min_
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        const = self.data_range_ == 0
        denom = np.where(const, 1.0, self.data_range_)
        out = (X - self.data_min_) / denom
        out[:, const] = 0.0
        return out


def minmax_scale(train, *others):
    """Scale ``train`` to [0, 1] and apply the same map to ``others``."""
    scaler = UnitScaler().fit(train.features)
    scaled = [replace(d, features=scaler.transform(d.features)) for d in (train, *others)]
    if not others:
        return scaled[0]
    return tuple(scaled)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.75
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


def split_indices(labels, spec):
    """Shuffled (stratified) train/test index arrays."""
    labels = np.asarray(labels)
    gen = np.random.Generator(np.random.PCG64(spec.seed))
    train, test = [], []
    pooled = []
    groups = [np.flatnonzero(labels == c) for c in np.unique(labels)] if spec.stratified else []
    if not spec.stratified:
        pooled = list(range(labels.size))
    for c_idx in groups:
        if c_idx.size < 2:
            logger.warning(
                "class %s has %d sample(s); splitting it unstratified", labels[c_idx[0]], c_idx.size
            )
            pooled.extend(c_idx.tolist())
            continue
        c_idx = gen.permutation(c_idx)
        k = min(max(round(spec.train_fraction * c_idx.size), 1), c_idx.size - 1)
        train.extend(c_idx[:k].tolist())
        test.extend(c_idx[k:].tolist())
    if pooled:
        pooled = gen.permutation(np.asarray(pooled))
        k = round(spec.train_fraction * pooled.size)
        train.extend(pooled[:k].tolist())
        test.extend(pooled[k:].tolist())
    return np.sort(np.asarray(train, dtype=np.int64)), np.sort(np.asarray(test, dtype=np.int64))


def split(dataset, spec=SplitSpec()):
    tr, te = split_indices(dataset.labels, spec)
    return dataset.subset(tr), dataset.subset(te)


class EpochEnd(StopIteration):
    """Raised by :meth:`BatchIterator.next_batch` once the epoch is used up."""


class BatchIterator:
    """Shuffled mini-batches with one-hot targets; keeps the last partial batch.

    Each epoch starts with a fresh permutation drawn from ``stream``.
    """

    def __init__(self, inputs, labels, n_classes, batch_size=128, stream=None):
        if batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        self.inputs = inputs
        self.labels = np.asarray(labels, dtype=np.int64)
        self.n_classes = n_classes
        self.batch_size = batch_size
        self.stream = stream
        self._order = None
        self._pos = 0

    @property
    def n_samples(self):
        return self.labels.shape[0]

    @property
    def batches_per_epoch(self):
        return math.ceil(self.n_samples / self.batch_size)

    def start_epoch(self):
        if self.stream is None:
            self._order = np.arange(self.n_samples)
        else:
            self._order = permutation(self.stream, self.n_samples)
        self._pos = 0

    def next_batch(self):
        if self._order is None or self._pos >= self.n_samples:
            raise EpochEnd
        idx = self._order[self._pos:self._pos + self.batch_size]
        self._pos += idx.size
        return Batch(self.inputs[idx], one_hot(self.labels[idx], self.n_classes))

    def epoch(self):
        self.start_epoch()
        while True:
            try:
                yield self.next_batch()
            except EpochEnd:
                return


def make_two_class(n=400, n_features=2, separation=3.0, noise=1.0, seed=0):
    """Two Gaussian blobs whose means differ by ``separation`` along every axis."""
    gen = np.random.Generator(np.random.PCG64(seed))
    labels = np.arange(n) % 2
    centers = np.where(labels[:, None] == 1, separation / 2.0, -separation / 2.0)
    feats = centers + noise * gen.standard_normal((n, n_features))
    return TabularDataset(
        features=feats,
        labels=labels,
        n_classes=2,
        feature_names=[f"x{k}" for k in range(n_features)],
        class_names=["0", "1"],
    )


def make_toy_images(n=200, channels=1, height=8, width=8, seed=0, noise=0.15):
    """Two-class images: class 0 has a bright top-left quadrant, class 1 bottom-right.

    Pixel values are float32-representable and lie in [0, 1].
    """
    gen = np.random.Generator(np.random.PCG64(seed))
    labels = np.arange(n) % 2
    images = 0.2 + noise * gen.standard_normal((n, channels, height, width))
    hh, hw = max(height // 2, 1), max(width // 2, 1)
    for k, c in enumerate(labels):
        if c == 0:
            images[k, :, :hh, :hw] += 0.6
        else:
            images[k, :, height - hh:, width - hw:] += 0.6
    images = np.clip(images, 0.0, 1.0).astype(np.float32).astype(np.float64)
    return images, labels


def write_images(path, images, labels=None):
    """Little-endian file: magic, four u32 dims, float32 pixels, optional label trailer."""
    images = np.asarray(images)
    if images.ndim != 4:
        raise ValueError("images must be (batch, channels, H, W)")
    with open(path, "wb") as fh:
        fh.write(IMAGE_MAGIC)
        fh.write(struct.pack("<4I", *images.shape))
        fh.write(images.astype("<f4").tobytes())
        if labels is not None:
            labels = np.asarray(labels)
            fh.write(LABEL_MAGIC)
            fh.write(struct.pack("<I", labels.size))
            fh.write(labels.astype("<u4").tobytes())


def read_images(path):
    """Inverse of :func:`write_images`; labels are ``None`` when absent."""
    blob = Path(path).read_bytes()
    if len(blob) < 20 or blob[:4] != IMAGE_MAGIC:
        raise MalformedImageFileError(f"{path}: bad magic or truncated header")
    dims = struct.unpack("<4I", blob[4:20])
    count = int(np.prod(dims))
    end = 20 + 4 * count
    if len(blob) < end:
        raise MalformedImageFileError(f"{path}: header promises {dims} but payload is short")
    images = np.frombuffer(blob[20:end], dtype="<f4").reshape(dims).astype(np.float64)
    labels = None
    rest = blob[end:]
    if rest:
        if rest[:4] != LABEL_MAGIC or len(rest) < 8:
            raise MalformedImageFileError(f"{path}: trailing bytes are not a label block")
        (nl,) = struct.unpack("<I", rest[4:8])
        if nl != dims[0] or len(rest) != 8 + 4 * nl:
            raise MalformedImageFileError(f"{path}: label block does not match batch size")
        labels = np.frombuffer(rest[8:], dtype="<u4").astype(np.int64)
    return images, labels
