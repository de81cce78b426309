"""Dataset loading, preprocessing and splitting.

Loaders return a :class:`Dataset` whose samples are float64 row vectors.
IDX and CSV inputs may be gzip-compressed; compression is detected from
the 0x1f 0x8b prefix, not the file name.
"""

import csv
import gzip
import struct
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

NORMALIZATION_TAGS = ("raw", "unit_scaled", "binarized", "pca", "zscore")


@dataclass
class Dataset:
    """A sample matrix (n_samples x n_dims) with optional labels.

    ``dims`` carries the original (height, width) for image data;
    ``normalization`` records which preprocessing produced the values.
    """

    samples: np.ndarray
    labels: Optional[np.ndarray] = None
    dims: Optional[tuple] = None
    normalization: str = "raw"

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[0] < 1:
            raise ValueError("samples must be a non-empty 2-D matrix")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.samples.shape[0],):
                raise ValueError("labels length must equal n_samples")
        if self.normalization not in NORMALIZATION_TAGS:
            raise ValueError(f"unknown normalization tag {self.normalization!r}")

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def n_dims(self):
        return self.samples.shape[1]


@dataclass
class PcaModel:
    """Mean vector plus the top-k orthonormal principal directions."""

    mean: np.ndarray
    components: np.ndarray  # (n_dims, k), orthonormal columns
    k: int


def _read_bytes(path):
    """Read a whole file, transparently decompressing gzip."""
    with open(path, "rb") as f:
        prefix = f.read(2)
        f.seek(0)
        if prefix == b"\x1f\x8b":
            with gzip.open(f) as g:
                return g.read()
        return f.read()


def _be32(data, offset, what):
    if offset + 4 > len(data):
        raise ValueError(f"truncated file: {what} needs 4 bytes at byte {offset}")
    return struct.unpack_from(">I", data, offset)[0]


def load_idx_images(path):
    """Load an IDX unsigned-byte image file (MNIST format) as a raw Dataset.

    Header: big-endian magic 0x00000803, then n, rows, cols; pixel bytes
    follow row-major. Pixels are returned as reals in [0, 255].
    """
    data = _read_bytes(path)
    magic = _be32(data, 0, "magic")
    if magic != IDX_IMAGE_MAGIC:
        raise ValueError(f"bad magic 0x{magic:08x} at byte 0 (want 0x{IDX_IMAGE_MAGIC:08x})")
    n = _be32(data, 4, "sample count")
    rows = _be32(data, 8, "row count")
    cols = _be32(data, 12, "column count")
    total = n * rows * cols
    if total > 2**40:
        raise ValueError(f"dimension overflow: {n}x{rows}x{cols} declared at byte 4")
    if len(data) - 16 < total:
        raise ValueError(
            f"truncated file: {total} pixel bytes declared, {len(data) - 16} present at byte 16"
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=total, offset=16)
    samples = pixels.reshape(n, rows * cols).astype(np.float64)
    return Dataset(samples=samples, dims=(rows, cols), normalization="raw")


def load_idx_labels(path):
    """Load an IDX unsigned-byte label file; returns an int64 vector."""
    data = _read_bytes(path)
    magic = _be32(data, 0, "magic")
    if magic != IDX_LABEL_MAGIC:
        raise ValueError(f"bad magic 0x{magic:08x} at byte 0 (want 0x{IDX_LABEL_MAGIC:08x})")
    n = _be32(data, 4, "label count")
    if len(data) - 8 < n:
        raise ValueError(f"truncated file: {n} label bytes declared, {len(data) - 8} present at byte 8")
    return np.frombuffer(data, dtype=np.uint8, count=n, offset=8).astype(np.int64)


def load_csv(path, has_labels=False, label_column=0):
    """Load a rectangular numeric CSV as a Dataset.

    A non-numeric first row is treated as a header and skipped. With
    ``has_labels``, the given column is split off as integer labels.
    """
    text = _read_bytes(path).decode("utf-8")
    reader = csv.reader(text.splitlines())
    rows = [row for row in reader if row]
    if not rows:
        raise ValueError("empty CSV")

    def parse_row(row, row_idx):
        out = []
        for col_idx, cell in enumerate(row):
            try:
                out.append(float(cell))
            except ValueError:
                raise ValueError(f"non-numeric cell {cell!r} at row {row_idx}, column {col_idx}") from None
        return out

    start = 0
    try:
        parse_row(rows[0], 0)
    except ValueError:
        start = 1  # header row
        if len(rows) == 1:
            raise ValueError("CSV contains only a header row") from None

    width = len(rows[start])
    parsed = []
    for i in range(start, len(rows)):
        if len(rows[i]) != width:
            raise ValueError(f"ragged row {i}: {len(rows[i])} cells, expected {width}")
        parsed.append(parse_row(rows[i], i))
    matrix = np.array(parsed, dtype=np.float64)

    labels = None
    if has_labels:
        if not (0 <= label_column < width):
            raise ValueError(f"label column {label_column} out of range for {width} columns")
        raw = matrix[:, label_column]
        if not np.all(raw == np.floor(raw)):
            bad = int(np.argmax(raw != np.floor(raw)))
            raise ValueError(f"non-integral label at row {start + bad}, column {label_column}")
        labels = raw.astype(np.int64)
        matrix = np.delete(matrix, label_column, axis=1)
    return Dataset(samples=matrix, labels=labels)


def normalize(d, mode, threshold=0.5, max_value=None):
    """Return a new Dataset with samples rescaled per ``mode``.

    unit_scale divides by a known maximum (255 for raw image data unless
    given). binarize maps v >= threshold to 1, else 0. zscore centers and
    scales per dimension; zero-variance dimensions are centered with a
    unit denominator instead of erroring.
    """
    x = d.samples
    if mode == "unit_scale":
        if max_value is None:
            if d.normalization == "raw":
                max_value = 255.0
            elif d.normalization == "unit_scaled":
                max_value = 1.0
            else:
                max_value = float(np.max(np.abs(x))) or 1.0
        return replace(d, samples=x / float(max_value), normalization="unit_scaled")
    if mode == "binarize":
        if d.normalization != "unit_scaled" and not (x.min() <= threshold <= x.max()):
            warnings.warn(
                f"binarize threshold {threshold} lies outside the data range "
                f"[{x.min()}, {x.max()}] of non-unit_scaled data",
                stacklevel=2,
            )
        return replace(d, samples=(x >= threshold).astype(np.float64), normalization="binarized")
    if mode == "zscore":
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return replace(d, samples=(x - mean) / std, normalization="zscore")
    raise ValueError(f"unknown normalize mode {mode!r}")


def pca_fit(d, k):
    """Fit the top-k principal directions of the sample covariance.

    The covariance uses the 1/n convention, so the total reconstruction
    error of a k-dim projection equals n_samples times the discarded
    eigenvalue mass.
    """
    x = d.samples
    n, dims = x.shape
    if k > dims:
        raise ValueError(f"k={k} exceeds n_dims={dims}")
    if dims > n:
        raise ValueError(f"pca_fit needs n_samples >= n_dims ({n} < {dims})")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / n
    eigvals, eigvecs = np.linalg.eigh(cov)
    components = eigvecs[:, ::-1][:, :k].copy()
    # fix each direction's sign so output does not depend on eigh's choice
    for j in range(k):
        col = components[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            components[:, j] = -col
    return PcaModel(mean=mean, components=components, k=k)


def pca_transform(m, d):
    """Project samples onto the fitted directions: (x - mean) @ components."""
    if d.n_dims != m.mean.shape[0]:
        raise ValueError(f"dataset has {d.n_dims} dims, PCA model expects {m.mean.shape[0]}")
    projected = (d.samples - m.mean) @ m.components
    return Dataset(samples=projected, labels=d.labels, dims=None, normalization="pca")


def resize_nearest(d, new_shape):
    """Nearest-neighbour resample every image to (h, w).

    Index mapping is exact integer arithmetic, src = (dst * src_len) // dst_len,
    so an identity resize is bit-identical and up/down scaling is testable
    by hand.
    """
    if d.dims is None:
        raise ValueError("resize_nearest requires image dims on the dataset")
    src_h, src_w = d.dims
    dst_h, dst_w = new_shape
    if dst_h < 1 or dst_w < 1:
        raise ValueError("target shape must be positive")
    rows = (np.arange(dst_h) * src_h) // dst_h
    cols = (np.arange(dst_w) * src_w) // dst_w
    images = d.samples.reshape(d.n_samples, src_h, src_w)
    resized = images[:, rows][:, :, cols].reshape(d.n_samples, dst_h * dst_w)
    return replace(d, samples=resized, dims=(dst_h, dst_w))


def split(d, fractions, seed):
    """Deterministic shuffled partition into (train, valid, test).

    Sizes are floor(fraction * n) with the remainder assigned to train.
    Raises if any part would be empty.
    """
    f_train, f_valid, f_test = fractions
    if min(f_train, f_valid, f_test) <= 0:
        raise ValueError("all fractions must be positive")
    if abs(f_train + f_valid + f_test - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {f_train + f_valid + f_test}")
    n = d.n_samples
    n_valid = int(f_valid * n)
    n_test = int(f_test * n)
    n_train = n - n_valid - n_test
    if min(n_train, n_valid, n_test) < 1:
        raise ValueError(f"split of {n} samples by {fractions} leaves an empty part")
    perm = np.random.default_rng(seed).permutation(n)

    def take(idx):
        labels = d.labels[idx] if d.labels is not None else None
        return replace(d, samples=d.samples[idx], labels=labels)

    return (
        take(perm[:n_train]),
        take(perm[n_train:n_train + n_valid]),
        take(perm[n_train + n_valid:]),
    )
