"""Synthetic generators, LIBSVM I/O and preprocessing pipelines.

Random streams come from numpy's Philox4x64 counter-based generator seeded
with a 64-bit integer. Gaussian variates are produced with the Box-Muller
transform from Philox uniforms (first all cosine branches, then all sine
branches), so a reimplementation using Philox4x64-10 can replicate them.
"""
from dataclasses import dataclass, field, asdict
import io
import json
import math
import os

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import ParseError
from .model import Dataset

__all__ = [
    "Spec1",
    "Spec2",
    "PreparedData",
    "make_rng",
    "standard_normal",
    "gen_example1",
    "gen_example2",
    "parse_libsvm",
    "serialize_libsvm",
    "map_labels",
    "normalize_two_pass",
    "scale_to_unit_interval",
    "split_first_rows",
    "load_libsvm_data",
    "write_manifest",
]


def make_rng(seed):
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def standard_normal(rng, size):
    """Box-Muller standard normals of the given shape."""
    shape = (size,) if np.isscalar(size) else tuple(size)
    m = int(np.prod(shape))
    k = (m + 1) // 2
    u1 = 1.0 - rng.random(k)  # (0, 1], keeps log finite
    u2 = rng.random(k)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * math.pi * u2
    out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:m]
    return out.reshape(shape)


@dataclass(frozen=True)
class Spec1:
    """Independent-feature design: ``x_i = y_i v_i 1 + w_i``."""

    n: int
    p: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.p < 1:
            raise ValueError("Spec1 needs n >= 2 and p >= 1")


@dataclass(frozen=True)
class Spec2:
    """AR(1)-correlated features with labels drawn from a sparse logistic model."""

    n: int
    p: int
    s: int
    rho: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ValueError("Spec2 needs n >= 1 and p >= 1")
        if not (1 <= self.s <= self.p):
            raise ValueError("Spec2 needs 1 <= s <= p")
        if not (0.0 <= self.rho <= 1.0):
            raise ValueError("rho must lie in [0, 1]")


@dataclass
class PreparedData:
    train: Dataset
    test: Dataset = None
    provenance: dict = field(default_factory=dict)
    truth: np.ndarray = None

    def __post_init__(self):
        if self.test is not None and self.test.p != self.train.p:
            raise ValueError("train and test feature counts differ")

    @property
    def p(self):
        return self.train.p


def gen_example1(spec):
    rng = make_rng(spec.seed)
    n, p = spec.n, spec.p
    perm = rng.permutation(n)
    y = np.ones(n)
    y[perm[: n // 2]] = 0.0
    v = standard_normal(rng, n)
    W = standard_normal(rng, (n, p))
    X = W + (y * v)[:, None]
    return PreparedData(
        train=Dataset(X, y),
        provenance={"source": "example1", **asdict(spec)},
    )


def _ar1_features(rng, n, p, rho):
    X = np.empty((n, p), order="F")
    X[:, 0] = standard_normal(rng, n)
    if p > 1:
        V = standard_normal(rng, (n, p - 1))
        a = math.sqrt(max(0.0, 1.0 - rho * rho))
        for j in range(p - 1):
            X[:, j + 1] = rho * X[:, j] + a * V[:, j]
    return np.ascontiguousarray(X)


def gen_example2(spec):
    rng = make_rng(spec.seed)
    n, p, s = spec.n, spec.p, spec.s
    support = np.sort(rng.choice(p, size=s, replace=False))
    truth = np.zeros(p)
    truth[support] = standard_normal(rng, s)
    X = _ar1_features(rng, n, p, spec.rho)
    # P(y_i = 1 | x_i) = sigmoid(<x_i, z*>)
    prob1 = expit(X @ truth)
    y = (rng.random(n) < prob1).astype(np.float64)
    return PreparedData(
        train=Dataset(X, y),
        provenance={"source": "example2", **asdict(spec)},
        truth=truth,
    )


def map_labels(raw):
    """Map a two-valued label vector to {0, 1} (smaller value -> 0).

    A single distinct value maps to 0 when it is <= 0 and to 1 otherwise.
    """
    raw = np.asarray(raw, dtype=np.float64)
    values = np.unique(raw)
    if values.size > 2:
        raise ValueError(f"expected at most two label values, got {values.tolist()}")
    if values.size == 2:
        return (raw == values[1]).astype(np.float64)
    return (raw > 0).astype(np.float64)


_LABEL_SETS = ({-1.0, 0.0, 1.0}, {1.0, 2.0})


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8")), True
    if isinstance(source, io.TextIOBase):
        return source, False
    return io.TextIOWrapper(source, encoding="utf-8"), False


def parse_libsvm(source, n_features=None):
    """Read ``<label> <idx>:<val> ...`` lines (1-based, increasing indices).

    ``source`` is a path, a bytes object or an open stream. The feature count
    is the largest index seen unless ``n_features`` is given.
    """
    fh, owned = _open_text(source)
    labels, indptr, indices, values = [], [0], [], []
    try:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                labels.append(float(tokens[0]))
            except ValueError:
                raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
            last = 0
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError(f"expected idx:value, got {tok!r}", lineno)
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(f"bad feature {tok!r}", lineno) from None
                if idx < 1:
                    raise ParseError(f"feature index {idx} is not 1-based", lineno)
                if idx <= last:
                    raise ParseError("feature indices must be strictly increasing", lineno)
                if not math.isfinite(val):
                    raise ParseError(f"non-finite value {val_s!r}", lineno)
                last = idx
                indices.append(idx - 1)
                values.append(val)
            indptr.append(len(indices))
    finally:
        if owned:
            fh.close()
    if not labels:
        raise ParseError("no samples found")
    raw = set(labels)
    if not any(raw <= allowed for allowed in _LABEL_SETS):
        raise ParseError(f"unsupported label values {sorted(raw)}")
    p_seen = (max(indices) + 1) if indices else 0
    if n_features is None:
        p = max(p_seen, 1)
    else:
        if n_features < p_seen:
            raise ParseError(f"index {p_seen} exceeds n_features={n_features}")
        p = n_features
    X = sp.csr_matrix(
        (np.asarray(values, dtype=np.float64), np.asarray(indices, dtype=np.int64),
         np.asarray(indptr, dtype=np.int64)),
        shape=(len(labels), p),
    )
    return Dataset(X, map_labels(labels))


def serialize_libsvm(ds, target):
    """Write ``ds`` in LIBSVM format with ``%.17g`` values; labels as 0/1."""
    X = ds.X if ds.is_sparse else sp.csr_matrix(ds.X)
    lines = []
    for i in range(ds.n):
        start, end = X.indptr[i], X.indptr[i + 1]
        feats = " ".join(
            f"{j + 1}:{v:.17g}" for j, v in zip(X.indices[start:end], X.data[start:end])
        )
        label = str(int(ds.y[i]))
        lines.append(f"{label} {feats}".rstrip())
    text = "\n".join(lines) + "\n"
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        target.write(text)


def normalize_two_pass(ds):
    """Standardize each sample, then each feature (population variance).

    Zero-variance rows or columns are centred but not scaled.
    """
    X = np.array(ds.toarray(), dtype=np.float64)
    for axis in (1, 0):
        mean = X.mean(axis=axis, keepdims=True)
        X -= mean
        std = np.sqrt((X * X).mean(axis=axis, keepdims=True))
        std[std == 0] = 1.0
        X /= std
    return Dataset(X, ds.y)


def scale_to_unit_interval(ds):
    """Map each feature affinely onto [-1, 1]; constant features become 0.

    Sparse input is scaled by the column max-abs instead so zeros stay zero.
    """
    if ds.is_sparse:
        X = ds.X.tocsc(copy=True)
        maxabs = np.asarray(abs(X).max(axis=0).todense()).ravel()
        maxabs[maxabs == 0] = 1.0
        X = X @ sp.diags(1.0 / maxabs)
        return Dataset(sp.csr_matrix(X), ds.y)
    X = np.array(ds.X, dtype=np.float64)
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = hi - lo
    const = span == 0
    span[const] = 1.0
    X = 2.0 * (X - lo) / span - 1.0
    X[:, const] = 0.0
    return Dataset(X, ds.y)


def split_first_rows(ds, m1):
    """First ``m1`` rows train, the rest test (None when nothing is left)."""
    if not (1 <= m1 <= ds.n):
        raise ValueError(f"training size {m1} out of range for n={ds.n}")
    train = ds.rows(np.arange(m1))
    test = ds.rows(np.arange(m1, ds.n)) if m1 < ds.n else None
    return train, test


_PREPROCESS = {
    "none": lambda ds: ds,
    "two_pass": normalize_two_pass,
    "unit_interval": scale_to_unit_interval,
}


def load_libsvm_data(path, test_path=None, n_train=None, preprocess="none"):
    """Load a LIBSVM file (and optional test file) into a PreparedData.

    With no test file, ``n_train`` splits off the first rows for training.
    Train and test are preprocessed independently.
    """
    if preprocess not in _PREPROCESS:
        raise ValueError(f"unknown preprocessing {preprocess!r}")
    train = parse_libsvm(path)
    test = None
    if test_path is not None:
        test = parse_libsvm(test_path)
        p = max(train.p, test.p)
        train = parse_libsvm(path, n_features=p) if train.p < p else train
        test = parse_libsvm(test_path, n_features=p) if test.p < p else test
    elif n_train is not None:
        train, test = split_first_rows(train, n_train)
    fn = _PREPROCESS[preprocess]
    train = fn(train)
    test = fn(test) if test is not None else None
    return PreparedData(
        train=train,
        test=test,
        provenance={
            "source": "libsvm",
            "path": str(path),
            "test_path": None if test_path is None else str(test_path),
            "preprocess": preprocess,
        },
    )


def write_manifest(prepared, path, **extra):
    """JSON manifest: provenance, dimensions and split sizes."""
    manifest = {
        "provenance": prepared.provenance,
        "p": prepared.p,
        "n_train": prepared.train.n,
        "n_test": 0 if prepared.test is None else prepared.test.n,
        "truth_support": None
        if prepared.truth is None
        else (np.flatnonzero(prepared.truth) + 1).tolist(),
        **extra,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest
