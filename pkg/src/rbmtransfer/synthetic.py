"""Deterministic synthetic digit corpus in the MNIST layout.

Renders 5x7 bitmap glyphs for the digits 0-9 onto 28x28 canvases with
randomized placement, stroke intensity and pixel noise, and can write
the result as IDX files. Used by the demos and by the scaled acceptance
runs when no real MNIST files are available; everything is a pure
function of the seed.
"""

import gzip
import struct

import numpy as np

from .data import Dataset

_GLYPHS = {
    0: ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    1: ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    2: ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    3: ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    4: ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    5: ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    6: ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    7: ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    8: ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    9: ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}


def _glyph_array(digit):
    rows = _GLYPHS[digit]
    return np.array([[int(c) for c in row] for row in rows], dtype=np.float64)


def synthetic_digits(n_samples, classes=range(10), image_shape=(28, 28), seed=0,
                     jitter=4, noise_sigma=16.0, invert_fraction=0.0,
                     stroke_dropout=0.0):
    """Generate a labelled raw-pixel digit Dataset (values 0..255).

    Per sample: a glyph of a cyclically assigned class is scaled 3x,
    placed at a jittered offset, drawn with random stroke intensity, and
    buried in gaussian pixel noise. ``stroke_dropout`` erases that
    fraction of each glyph's pixels per sample (broken-pen degradation,
    for intra-class variability). With ``invert_fraction`` > 0 that
    share of samples is rendered dark-on-bright, which breaks linear
    separability of the raw pixels while leaving classes recognizable to
    polarity-paired feature detectors. Deterministic per seed.
    """
    classes = list(classes)
    h, w = image_shape
    rng = np.random.default_rng(seed)
    scale = 3
    samples = np.empty((n_samples, h * w))
    labels = np.empty(n_samples, dtype=np.int64)
    for i in range(n_samples):
        digit = classes[i % len(classes)]
        glyph = _glyph_array(digit)
        big = np.kron(glyph, np.ones((scale, scale)))
        if stroke_dropout > 0:
            big = big * (rng.random(big.shape) >= stroke_dropout)
        gh, gw = big.shape
        canvas = np.zeros((h, w))
        base_r = (h - gh) // 2
        base_c = (w - gw) // 2
        r = base_r + rng.integers(-jitter, jitter + 1)
        c = base_c + rng.integers(-jitter, jitter + 1)
        r = int(np.clip(r, 0, h - gh))
        c = int(np.clip(c, 0, w - gw))
        intensity = rng.uniform(150, 255)
        canvas[r:r + gh, c:c + gw] = big * intensity
        canvas += rng.normal(0.0, noise_sigma, size=(h, w))
        pixels = np.clip(canvas, 0, 255)
        if rng.random() < invert_fraction:
            pixels = 255.0 - pixels
        samples[i] = pixels.ravel()
        labels[i] = digit
    perm = rng.permutation(n_samples)
    return Dataset(samples=samples[perm], labels=labels[perm],
                   dims=(h, w), normalization="raw")


def handwritten_digits(n_samples, classes=range(10), seed=0, train_pool=True,
                       jitter=2, noise_sigma=12.0):
    """28x28 corpus augmented from scikit-learn's real handwritten digits.

    Each sample upscales one of the bundled 8x8 pen-stroke digits to
    24x24, places it with a small random offset, and adds pixel noise.
    Real stroke variability makes this the preferred stand-in for
    MNIST-scale experiments; requires scikit-learn. The base glyphs are
    split into disjoint pools so train_pool=True/False never share a
    source glyph. Deterministic per seed.
    """
    try:
        from sklearn.datasets import load_digits
    except ImportError as e:
        raise ImportError(
            "handwritten_digits needs scikit-learn (pip install scikit-learn)"
        ) from e

    X, y = load_digits(return_X_y=True)
    pool = np.random.default_rng(1797).permutation(len(X))
    cut = 2 * len(X) // 3
    keep = pool[:cut] if train_pool else pool[cut:]
    X, y = X[keep], y[keep]
    mask = np.isin(y, list(classes))
    X, y = X[mask], y[mask]

    base = X / 16.0 * 255.0
    # nearest-neighbour 8x8 -> 24x24 (3x pixel replication)
    img = np.kron(base.reshape(-1, 8, 8), np.ones((3, 3)))
    rng = np.random.default_rng(seed)
    out = np.zeros((n_samples, 28, 28))
    lab = np.empty(n_samples, dtype=np.int64)
    for i in range(n_samples):
        j = int(rng.integers(0, len(X)))
        dr, dc = rng.integers(0, 2 * jitter + 1, size=2)
        canvas = np.zeros((28, 28))
        canvas[dr:dr + 24, dc:dc + 24] = img[j] * rng.uniform(0.7, 1.0)
        canvas += rng.normal(0.0, noise_sigma, size=(28, 28))
        out[i] = np.clip(canvas, 0, 255)
        lab[i] = y[j]
    return Dataset(samples=out.reshape(n_samples, 784), labels=lab,
                   dims=(28, 28), normalization="raw")


def write_idx_images(dataset, path, compress=False):
    """Write a raw image Dataset as an IDX3 unsigned-byte file."""
    if dataset.dims is None:
        raise ValueError("dataset has no image dims")
    h, w = dataset.dims
    header = struct.pack(">IIII", 0x00000803, dataset.n_samples, h, w)
    body = np.clip(np.rint(dataset.samples), 0, 255).astype(np.uint8).tobytes()
    opener = gzip.open if compress else open
    with opener(path, "wb") as f:
        f.write(header + body)


def write_idx_labels(labels, path, compress=False):
    """Write a label vector as an IDX1 unsigned-byte file."""
    labels = np.asarray(labels)
    header = struct.pack(">II", 0x00000801, labels.shape[0])
    opener = gzip.open if compress else open
    with opener(path, "wb") as f:
        f.write(header + labels.astype(np.uint8).tobytes())
