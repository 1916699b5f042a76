"""Dataset ingestion, preprocessing, splitting, and a synthetic generator."""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class FormatError(ValueError):
    """Malformed input file."""


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray  # +1/-1
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if len(self.X) != len(self.y):
            raise ValueError(f"{len(self.X)} rows but {len(self.y)} labels")
        if not np.all(np.isfinite(self.X)):
            raise ValueError(f"dataset {self.name!r} contains non-finite values")

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.name, dict(self.meta))


# ---------------------------------------------------------------- loaders


def _read_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_idx(path, expected_magic: int) -> np.ndarray:
    """Parse a big-endian IDX file of unsigned bytes into an array."""
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise FormatError(f"{path}: truncated at byte offset 0 (no magic number)")
    (magic,) = struct.unpack_from(">I", raw, 0)
    if magic != expected_magic:
        raise FormatError(
            f"{path}: bad magic 0x{magic:08x} at byte offset 0, expected 0x{expected_magic:08x}"
        )
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: truncated at byte offset {len(raw)} inside the header")
    dims = struct.unpack_from(f">{ndim}I", raw, 4)
    size = int(np.prod(dims))
    if len(raw) < header + size:
        raise FormatError(
            f"{path}: truncated at byte offset {len(raw)}, payload needs {header + size} bytes"
        )
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx(images_path, labels_path, class_a: int, class_b: int, name: str = "") -> Dataset:
    """Two-class subset of an IDX image/label pair; ``class_a`` -> -1, ``class_b`` -> +1."""
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = read_idx(labels_path, IDX_LABELS_MAGIC)
    if len(images) != len(labels):
        raise FormatError(
            f"{images_path}: {len(images)} images but {labels_path} has {len(labels)} labels"
        )
    keep = (labels == class_a) | (labels == class_b)
    for c in (class_a, class_b):
        if not np.any(labels == c):
            raise ValueError(f"class {c} not present in {labels_path}")
    X = images[keep].reshape(int(keep.sum()), -1).astype(np.float64)
    y = np.where(labels[keep] == class_b, 1.0, -1.0)
    return Dataset(X, y, name or Path(images_path).name, {"classes": [class_a, class_b]})


def write_idx(path, array: np.ndarray) -> None:
    """Write an unsigned-byte IDX file (used for fixtures)."""
    array = np.asarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    with open(path, "wb") as fh:
        fh.write(struct.pack(f">I{array.ndim}I", magic, *array.shape))
        fh.write(array.tobytes())


def load_csv(path, label_column: str, name: str = "") -> Dataset:
    """Headered numeric CSV; every non-label column is a feature, in header order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if label_column not in header:
            raise FormatError(
                f"{path}: no label column {label_column!r}; available columns: {header}"
            )
        li = header.index(label_column)
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(
                    f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}"
                )
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise FormatError(f"{path}: row {lineno}: {exc}") from None
            if not all(np.isfinite(values)):
                raise FormatError(f"{path}: row {lineno} contains NaN or Inf")
            labels.append(values.pop(li))
            rows.append(values)
            if len(set(labels)) > 2:
                raise FormatError(f"{path}: row {lineno} introduces a third label value")
    if not rows:
        raise FormatError(f"{path}: no data rows")
    y = np.asarray(labels)
    classes = np.unique(y)
    if len(classes) == 2:
        y = np.where(y == classes[1], 1.0, -1.0)
    elif set(classes) <= {-1.0, 1.0}:
        pass
    else:
        y = np.where(y > 0, 1.0, -1.0)
    return Dataset(np.asarray(rows), y, name or Path(path).stem, {"label_column": label_column})


# ------------------------------------------------------------ preprocessing


def standardize(X, mean=None, std=None):
    """Per-feature zero mean and unit population std.

    Returns ``(X_std, mean, std)``. Zero-variance columns map to zeros and
    report ``std = 0``. Pass ``mean``/``std`` to reuse fitted statistics.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if mean is None:
        if len(X) < 2:
            raise ValueError("standardize needs at least two rows")
        mean = X.mean(axis=0)
        std = X.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    out = (X - mean) / safe
    out[:, std == 0] = 0.0
    return out, mean, std


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (d, D), orthonormal rows
    explained_variance: np.ndarray  # (d,), descending, population scaling
    discarded_variance: float = 0.0

    @property
    def n_components(self) -> int:
        return len(self.components)


def pca_fit(X, d: int) -> PcaModel:
    """Top-``d`` right singular vectors of the centered data.

    Each component is sign-fixed so its largest-magnitude entry is positive.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, D = X.shape
    if not 1 <= d <= min(n, D):
        raise ValueError(f"cannot keep {d} components from a {n}x{D} matrix")
    mean = X.mean(axis=0)
    _, s, Vt = np.linalg.svd(X - mean, full_matrices=False)
    comps = Vt[:d].copy()
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(d), pivot])
    comps *= np.where(signs == 0, 1.0, signs)[:, None]
    var = s**2 / n
    return PcaModel(mean, comps, var[:d].copy(), float(var[d:].sum()))


def pca_transform(model: PcaModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return (X - model.mean) @ model.components.T


# ---------------------------------------------------------------- splits


def _balanced_take(y, n: int, rng) -> dict:
    """Per-class counts summing to n that differ by at most one."""
    half, extra = divmod(n, 2)
    counts = {-1.0: half, 1.0: half}
    if extra:
        counts[float(rng.choice([-1.0, 1.0]))] += 1
    return counts


def split_train_test(ds: Dataset, n_train: int = 800, n_test: int = 200, rng_seed=0):
    """Disjoint, seeded, class-balanced train/test samples."""
    rng = np.random.default_rng(rng_seed)
    c_train = _balanced_take(ds.y, n_train, rng)
    c_test = _balanced_take(ds.y, n_test, rng)
    train_idx, test_idx = [], []
    for label in (-1.0, 1.0):
        idx = np.flatnonzero(ds.y == label)
        need = c_train[label] + c_test[label]
        if len(idx) < need:
            raise ValueError(
                f"class {label:+.0f} has {len(idx)} rows, split needs {need}"
            )
        idx = rng.permutation(idx)
        train_idx.append(idx[: c_train[label]])
        test_idx.append(idx[c_train[label] : need])
    train_idx = rng.permutation(np.concatenate(train_idx))
    test_idx = rng.permutation(np.concatenate(test_idx))
    return ds.subset(train_idx), ds.subset(test_idx)


def sample_balanced(ds: Dataset, n: int, rng_seed=0) -> Dataset:
    """Seeded class-balanced sample of ``n`` rows (for corpora with a fixed test file)."""
    train, _ = split_train_test(ds, n, 0, rng_seed)
    return train


def synthetic_two_class(
    n: int, D: int, separation: float, rng_seed=0, kind: str = "blobs",
    linear_separation: float = 0.0,
) -> Dataset:
    """Seeded two-class Gaussian data with unit covariance.

    ``kind="blobs"``: one blob per class at ``+-(separation/2) u`` for a random
    unit direction ``u``; the Bayes rule is linear.
    ``kind="xor"``: four blobs at ``(+-s/2) u + (+-s/2) v`` for orthonormal
    ``u, v``, labelled by the sign of the product of the two offsets. No
    linear rule beats chance, so very wide kernels underfit.
    ``linear_separation`` (xor only) additionally shifts the classes to
    ``+-(linear_separation/2) w`` along a third orthonormal direction ``w``,
    giving a linear rule partial signal.
    """
    if n % 2 or n <= 0:
        raise ValueError("n must be a positive even number")
    if D < 1:
        raise ValueError("D must be >= 1")
    rng = np.random.default_rng(rng_seed)
    u = rng.standard_normal(D)
    u /= np.linalg.norm(u)
    y = np.repeat([-1.0, 1.0], n // 2)
    X = rng.standard_normal((n, D))
    meta = {"separation": separation, "kind": kind, "direction": u.tolist()}
    if kind == "blobs":
        X += (separation / 2) * y[:, None] * u
    elif kind == "xor":
        if D < 2:
            raise ValueError("xor data needs D >= 2")
        v = rng.standard_normal(D)
        v -= (v @ u) * u
        v /= np.linalg.norm(v)
        a = rng.choice([-1.0, 1.0], size=n)
        b = a * y  # same signs -> +1, opposite -> -1
        X += (separation / 2) * (a[:, None] * u + b[:, None] * v)
        meta["direction2"] = v.tolist()
        if linear_separation:
            if D < 3:
                raise ValueError("linear_separation needs D >= 3")
            w = rng.standard_normal(D)
            w -= (w @ u) * u + (w @ v) * v
            w /= np.linalg.norm(w)
            X += (linear_separation / 2) * y[:, None] * w
            meta["linear_separation"] = linear_separation
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    order = rng.permutation(n)
    name = f"synthetic-{kind}-D{D}-sep{separation:g}"
    return Dataset(X[order], y[order], name, meta)


# ------------------------------------------------------------- pipeline


@dataclass
class Prepared:
    """Train/test matrices ready for a feature map (before bandwidth scaling)."""

    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    pca: Optional[PcaModel] = None


def preprocess(
    pool: Dataset, d: int, n_train: int, n_test: int, rng_seed=0,
    restandardize: bool = True, test_pool: Optional[Dataset] = None,
    fit_on_train: bool = False,
) -> Prepared:
    """standardize -> PCA(d) -> optional re-standardize, then split.

    With the default ``fit_on_train=False`` the statistics and PCA are fitted
    on the whole pool (and ``test_pool`` when given) before sampling.
    """
    if test_pool is None:
        train, test = split_train_test(pool, n_train, n_test, rng_seed)
    else:
        train = sample_balanced(pool, n_train, rng_seed)
        test = sample_balanced(test_pool, n_test, rng_seed + 1)

    if fit_on_train:
        fit_X = train.X
    elif test_pool is None:
        fit_X = pool.X
    else:
        fit_X = np.vstack([pool.X, test_pool.X])

    _, mu, sd = standardize(fit_X)
    pca = pca_fit(standardize(fit_X, mu, sd)[0], d)

    def run(X):
        Z = pca_transform(pca, standardize(X, mu, sd)[0])
        return Z

    Z_fit = run(fit_X)
    Z_train, Z_test = run(train.X), run(test.X)
    if restandardize:
        _, mu2, sd2 = standardize(Z_fit)
        Z_train = standardize(Z_train, mu2, sd2)[0]
        Z_test = standardize(Z_test, mu2, sd2)[0]
    return Prepared(Z_train, train.y, Z_test, test.y, pca)


# ------------------------------------------------------------ binary cache

_CACHE_MAGIC = b"QKDS"
_CACHE_VERSION = 1


def save_dataset(path, ds: Dataset) -> None:
    """Versioned little-endian container: header, row-major doubles, int8 labels."""
    name = ds.name.encode()
    n, D = ds.X.shape
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<IQQI", _CACHE_VERSION, n, D, len(name)))
        fh.write(name)
        fh.write(np.ascontiguousarray(ds.X, dtype="<f8").tobytes())
        fh.write(ds.y.astype(np.int8).tobytes())


def load_dataset(path) -> Dataset:
    raw = Path(path).read_bytes()
    if raw[:4] != _CACHE_MAGIC:
        raise FormatError(f"{path}: bad cache magic at byte offset 0")
    version, n, D, name_len = struct.unpack_from("<IQQI", raw, 4)
    if version != _CACHE_VERSION:
        raise FormatError(f"{path}: unsupported cache version {version}")
    off = 4 + struct.calcsize("<IQQI")
    name = raw[off : off + name_len].decode()
    off += name_len
    need = off + 8 * n * D + n
    if len(raw) != need:
        raise FormatError(f"{path}: expected {need} bytes, found {len(raw)}")
    X = np.frombuffer(raw, dtype="<f8", count=n * D, offset=off).reshape(n, D)
    y = np.frombuffer(raw, dtype=np.int8, count=n, offset=off + 8 * n * D)
    return Dataset(X.copy(), y.astype(np.float64), name)
