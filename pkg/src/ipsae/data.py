"""Zero-shot datasets: container, file formats, preprocessing and splitting.

Conventions: features are ``d x n`` (one column per sample) and class
attributes are ``k x C`` (one column per class). A sample's semantic vector
is the attribute column of its class.

Directory format::

    features.csv | features.bin   d x n
    attributes.csv | attributes.bin   k x C
    labels.csv    one integer class id per line
    splits.csv    "seen: 0,1,..." and "unseen: 5,6,..."

CSV matrices start with a ``rows,cols`` header line. Binary matrices are
``b"IPSA"``, u32 version (1), u32 rows, u32 cols, then rows*cols
little-endian float64 values in row-major order.
"""
from __future__ import annotations

import logging
import math
import re
import struct
from dataclasses import dataclass, field
from decimal import ROUND_FLOOR, Decimal
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BadThreshold,
    DataIOError,
    DimensionMismatch,
    EmptyClass,
    EmptySeenClass,
    FormatError,
    IndexOutOfRange,
    InfeasibleConfig,
    InvariantViolation,
    MissingFile,
)
from .linalg import as_matrix, concat_rows

log = logging.getLogger(__name__)

MATRIX_MAGIC = b"IPSA"
MATRIX_VERSION = 1
_HEADER = struct.Struct("<4sIII")
_FLOAT_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\Z")
_INT_RE = re.compile(r"[+-]?\d+\Z")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ZslDataset:
    """Features, labels, class attributes and the seen/unseen partition."""

    features: np.ndarray
    labels: np.ndarray
    class_attributes: np.ndarray
    seen_classes: tuple[int, ...]
    unseen_classes: tuple[int, ...]
    name: str = "dataset"

    def __post_init__(self):
        X = as_matrix(self.features, "features")
        S = as_matrix(self.class_attributes, "class_attributes")
        y = np.asarray(self.labels)
        if y.ndim != 1 or (y.size and not np.issubdtype(y.dtype, np.integer)):
            raise InvariantViolation("labels must be a 1-D integer sequence")
        y = y.astype(np.int64)
        if y.size != X.shape[1]:
            raise DimensionMismatch(f"{y.size} labels for {X.shape[1]} feature columns")
        n_classes = S.shape[1]
        seen = tuple(int(c) for c in self.seen_classes)
        unseen = tuple(int(c) for c in self.unseen_classes)
        if len(set(seen)) != len(seen) or len(set(unseen)) != len(unseen):
            raise InvariantViolation("duplicate class id in a split")
        overlap = set(seen) & set(unseen)
        if overlap:
            raise InvariantViolation(f"classes {sorted(overlap)} are both seen and unseen")
        for c in seen + unseen:
            if not 0 <= c < n_classes:
                raise InvariantViolation(f"split class {c} outside 0..{n_classes - 1}")
        if y.size and (y.min() < 0 or y.max() >= n_classes):
            raise InvariantViolation(f"label outside 0..{n_classes - 1}")
        stray = set(np.unique(y).tolist()) - set(seen) - set(unseen)
        if stray:
            raise InvariantViolation(f"labels {sorted(stray)} belong to neither split")
        present = np.unique(y)
        if S.shape[0] and present.size:
            zero = present[~S[:, present].any(axis=0)]
            if zero.size:
                raise InvariantViolation(f"classes {zero.tolist()} have all-zero attributes")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "class_attributes", _frozen(S))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "seen_classes", seen)
        object.__setattr__(self, "unseen_classes", unseen)

    @property
    def d(self) -> int:
        return self.features.shape[0]

    @property
    def k(self) -> int:
        return self.class_attributes.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.class_attributes.shape[1]

    def indices_of(self, classes: Sequence[int]) -> np.ndarray:
        """Sample indices whose label is in ``classes``, ascending."""
        return np.flatnonzero(np.isin(self.labels, list(classes)))

    def summary(self) -> str:
        return (f"{self.name}: d={self.d} k={self.k} C={self.n_classes} n={self.n} "
                f"seen={len(self.seen_classes)} unseen={len(self.unseen_classes)}")


# -- matrix files ---------------------------------------------------------------

def write_matrix_bin(path, M) -> None:
    M = as_matrix(M)
    rows, cols = M.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, rows, cols))
        fh.write(np.ascontiguousarray(M, dtype="<f8").tobytes())


def read_matrix_bin(path) -> np.ndarray:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise MissingFile(f"{path} not found") from None
    if len(raw) < _HEADER.size:
        raise FormatError(path, "truncated header", offset=len(raw))
    magic, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != MATRIX_MAGIC:
        raise FormatError(path, f"bad magic {magic!r}", offset=0)
    if version != MATRIX_VERSION:
        raise FormatError(path, f"unsupported version {version}", offset=4)
    expected = _HEADER.size + 8 * rows * cols
    if len(raw) != expected:
        raise FormatError(path, f"expected {expected} bytes, found {len(raw)}",
                          offset=min(len(raw), expected))
    M = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(rows, cols)
    M = M.astype(np.float64)
    bad = np.argwhere(~np.isfinite(M))
    if bad.size:
        r, c = bad[0]
        raise FormatError(path, "non-finite value", offset=_HEADER.size + 8 * (r * cols + c))
    return M


def _parse_float(tok: str, path, line: int) -> float:
    tok = tok.strip()
    if not _FLOAT_RE.match(tok):
        raise FormatError(path, f"not a finite decimal number: {tok!r}", line=line)
    value = float(tok)
    if not math.isfinite(value):
        raise FormatError(path, f"value overflows float64: {tok!r}", line=line)
    return value


def _parse_int(tok: str, path, line: int) -> int:
    tok = tok.strip()
    if not _INT_RE.match(tok):
        raise FormatError(path, f"not an integer: {tok!r}", line=line)
    return int(tok)


def _read_lines(path) -> list[str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingFile(f"{path} not found") from None
    except UnicodeDecodeError as exc:
        raise FormatError(path, f"not UTF-8 text ({exc.reason})", offset=exc.start) from None
    return text.splitlines()


def read_matrix_csv(path) -> np.ndarray:
    lines = _read_lines(path)
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise FormatError(path, "empty file", line=1)
    head = lines[0].split(",")
    if len(head) != 2:
        raise FormatError(path, "header must be 'rows,cols'", line=1)
    rows, cols = (_parse_int(t, path, 1) for t in head)
    if rows < 0 or cols < 0:
        raise FormatError(path, "negative dimension", line=1)
    body = lines[1:]
    if len(body) != rows:
        raise FormatError(path, f"header declares {rows} rows, found {len(body)}",
                          line=len(lines) + 1)
    M = np.empty((rows, cols))
    for i, text in enumerate(body):
        toks = text.split(",") if cols else ([] if not text.strip() else text.split(","))
        if len(toks) != cols:
            raise FormatError(path, f"expected {cols} values, found {len(toks)}", line=i + 2)
        M[i] = [_parse_float(t, path, i + 2) for t in toks]
    return M


def write_matrix_csv(path, M) -> None:
    M = as_matrix(M)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{M.shape[0]},{M.shape[1]}\n")
        for row in M:
            # repr gives the shortest string that round-trips exactly
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _read_matrix(directory: Path, stem: str) -> np.ndarray:
    binary, text = directory / f"{stem}.bin", directory / f"{stem}.csv"
    if binary.exists():
        return read_matrix_bin(binary)
    if text.exists():
        return read_matrix_csv(text)
    raise MissingFile(f"neither {binary.name} nor {text.name} found in {directory}")


def read_labels(path) -> np.ndarray:
    lines = _read_lines(path)
    while lines and not lines[-1].strip():
        lines.pop()
    return np.array([_parse_int(t, path, i + 1) for i, t in enumerate(lines)], dtype=np.int64)


def read_splits(path) -> tuple[tuple[int, ...], tuple[int, ...]]:
    found = {}
    for i, text in enumerate(_read_lines(path)):
        if not text.strip():
            continue
        key, sep, rest = text.partition(":")
        key = key.strip().lower()
        if not sep or key not in ("seen", "unseen"):
            raise FormatError(path, "expected 'seen: ...' or 'unseen: ...'", line=i + 1)
        if key in found:
            raise FormatError(path, f"duplicate '{key}' line", line=i + 1)
        rest = rest.strip()
        found[key] = tuple(_parse_int(t, path, i + 1) for t in rest.split(",")) if rest else ()
    for key in ("seen", "unseen"):
        if key not in found:
            raise FormatError(path, f"missing '{key}' line")
    return found["seen"], found["unseen"]


def load_dataset(dir_path, name: str | None = None) -> ZslDataset:
    """Load a dataset directory (binary matrices preferred over CSV)."""
    directory = Path(dir_path)
    if not directory.is_dir():
        raise MissingFile(f"dataset directory {directory} not found")
    X = _read_matrix(directory, "features")
    S = _read_matrix(directory, "attributes")
    y = read_labels(directory / "labels.csv")
    seen, unseen = read_splits(directory / "splits.csv")
    if y.size != X.shape[1]:
        raise InvariantViolation(f"labels.csv has {y.size} entries, features have {X.shape[1]} columns")
    return ZslDataset(X, y, S, seen, unseen, name=name or directory.name)


def save_dataset(dataset: ZslDataset, dir_path, binary: bool = True) -> None:
    """Write ``dataset`` so that :func:`load_dataset` reproduces it exactly."""
    directory = Path(dir_path)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for stem in ("features", "attributes"):
            for ext in ("bin", "csv"):
                (directory / f"{stem}.{ext}").unlink(missing_ok=True)
        write = write_matrix_bin if binary else write_matrix_csv
        ext = "bin" if binary else "csv"
        write(directory / f"features.{ext}", dataset.features)
        write(directory / f"attributes.{ext}", dataset.class_attributes)
        (directory / "labels.csv").write_text(
            "".join(f"{int(v)}\n" for v in dataset.labels), encoding="utf-8")
        (directory / "splits.csv").write_text(
            "seen: " + ",".join(map(str, dataset.seen_classes)) + "\n"
            "unseen: " + ",".join(map(str, dataset.unseen_classes)) + "\n",
            encoding="utf-8")
    except OSError as exc:
        if isinstance(exc, DataIOError):
            raise
        raise DataIOError(f"cannot write dataset to {directory}: {exc}") from exc


# -- preprocessing --------------------------------------------------------------

def denoise_attributes(raw, labels, threshold: float = 0.5, n_classes: int | None = None,
                       keep: Sequence[int] | None = None):
    """Binarise per-image attributes into per-class attributes.

    An attribute is present for a class when at least ``threshold`` of that
    class's images carry it. Attributes whose binarised row is constant over
    all classes carry no information and are left out of ``kept`` unless an
    explicit ``keep`` list overrides the selection.

    Returns
    -------
    class_attributes : ndarray, shape (a, C)
    kept : list of int
    """
    raw = as_matrix(raw, "raw")
    labels = np.asarray(labels, dtype=np.int64)
    if not 0 < threshold <= 1:
        raise BadThreshold(f"threshold must be in (0, 1], got {threshold}")
    if labels.size != raw.shape[1]:
        raise DimensionMismatch(f"{labels.size} labels for {raw.shape[1]} images")
    if raw.size and (raw.min() < 0 or raw.max() > 1):
        raise InvariantViolation("raw attribute values must lie in [0, 1]")
    if labels.size and labels.min() < 0:
        raise InvariantViolation("negative class label")
    C = int(n_classes) if n_classes is not None else int(labels.max()) + 1 if labels.size else 0
    counts = np.bincount(labels, minlength=C)
    if counts.size > C:
        raise InvariantViolation(f"label {counts.size - 1} outside 0..{C - 1}")
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise EmptyClass(f"classes {empty.tolist()} have no images")
    onehot = np.zeros((labels.size, C))
    onehot[np.arange(labels.size), labels] = 1.0
    means = (raw @ onehot) / counts
    binary = (means >= threshold).astype(np.float64)
    if keep is None:
        kept = [i for i in range(binary.shape[0]) if np.ptp(binary[i]) > 0] if C else []
    else:
        kept = sorted(int(i) for i in keep)
        if kept and not 0 <= kept[0] <= kept[-1] < binary.shape[0]:
            raise IndexOutOfRange("keep index out of range")
    return binary, kept


def enrich(features, sample_attributes) -> np.ndarray:
    """Stack visual features on top of per-sample semantic vectors."""
    return concat_rows(features, sample_attributes)


def sample_attributes_for(dataset: ZslDataset, indices) -> np.ndarray:
    """Semantic column of each listed sample (its class attribute vector)."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= dataset.n):
        raise IndexOutOfRange(f"sample index outside 0..{dataset.n - 1}")
    return dataset.class_attributes[:, dataset.labels[idx]]


def normalize_features(dataset: ZslDataset) -> ZslDataset:
    """Copy of ``dataset`` with every feature column scaled to unit L2 norm."""
    X = np.array(dataset.features)
    norms = np.linalg.norm(X, axis=0)
    norms[norms == 0] = 1.0
    return ZslDataset(X / norms, dataset.labels, dataset.class_attributes,
                      dataset.seen_classes, dataset.unseen_classes, dataset.name)


# -- GZSL split -------------------------------------------------------------------

@dataclass(frozen=True)
class GzslSplit:
    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int
    seen_fraction: float


def held_out_count(count: int, fraction: float) -> int:
    """``round(fraction * count)`` rounding halves up, at least 1 when possible."""
    if count <= 0 or fraction <= 0:
        return 0
    exact = Decimal(repr(float(fraction))) * count
    held = int((exact + Decimal("0.5")).to_integral_value(rounding=ROUND_FLOOR))
    return min(count, max(1, held))


def split_gzsl(dataset: ZslDataset, seen_fraction: float = 0.2, seed: int = 0) -> GzslSplit:
    """Hold out a stratified share of every seen class for testing.

    Test indices are the held-out seen samples plus every unseen-class
    sample; training indices are the remaining seen samples.
    """
    if not 0 < seen_fraction < 1:
        raise ValueError(f"seen_fraction must be in (0, 1), got {seen_fraction}")
    rng = np.random.default_rng(seed)
    train, test = [], [dataset.indices_of(dataset.unseen_classes)]
    for c in dataset.seen_classes:
        members = np.flatnonzero(dataset.labels == c)
        if members.size == 0:
            raise EmptySeenClass(f"seen class {c} has no samples")
        held = rng.choice(members, size=held_out_count(members.size, seen_fraction),
                          replace=False)
        test.append(held)
        train.append(np.setdiff1d(members, held))
    return GzslSplit(np.sort(np.concatenate(train)), np.sort(np.concatenate(test)),
                     seed, seen_fraction)


# -- synthetic data ---------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticConfig:
    """Planted linear ZSL problem: ``x = M s_class + N(0, noise_sigma^2)``."""

    d: int = 32
    k: int = 12
    n_per_class: int = 30
    C_seen: int = 15
    C_unseen: int = 5
    noise_sigma: float = 0.3
    attribute_density: float = 0.4
    seed: int = 42
    name: str = field(default="synthetic", compare=False)

    def __post_init__(self):
        for key in ("d", "k", "n_per_class", "C_seen", "C_unseen"):
            if int(getattr(self, key)) < 1:
                raise InfeasibleConfig(f"{key} must be at least 1")
        if self.noise_sigma < 0:
            raise InfeasibleConfig("noise_sigma must be non-negative")
        if not 0 < self.attribute_density <= 1:
            raise InfeasibleConfig("attribute_density must be in (0, 1]")


def generate_synthetic(config: SyntheticConfig) -> ZslDataset:
    """Draw a dataset fully determined by ``config.seed``.

    Class attributes are binary with the configured density (redrawn when
    all-zero or duplicated). The planted map has orthonormal columns
    when ``k <= d``. Samples are grouped by class id.
    """
    cfg = config
    n_classes = cfg.C_seen + cfg.C_unseen
    if n_classes > 2 ** cfg.k - 1:
        raise InfeasibleConfig(
            f"cannot draw {n_classes} distinct nonzero binary vectors of length {cfg.k}")
    if cfg.k > cfg.d:
        log.warning("k=%d exceeds d=%d: the planted map cannot be orthonormal", cfg.k, cfg.d)
    rng = np.random.default_rng(cfg.seed)

    attrs, seen_rows = [], set()
    budget = 1000 * n_classes
    while len(attrs) < n_classes:
        if budget == 0:
            raise InfeasibleConfig(
                f"could not draw {n_classes} distinct attribute vectors at density "
                f"{cfg.attribute_density}")
        budget -= 1
        row = (rng.random(cfg.k) < cfg.attribute_density).astype(np.float64)
        key = row.tobytes()
        if not row.any() or key in seen_rows:
            continue
        seen_rows.add(key)
        attrs.append(row)
    S = np.stack(attrs, axis=1)

    G = rng.standard_normal((cfg.d, cfg.k))
    if cfg.k <= cfg.d:
        M, R = np.linalg.qr(G)
        M = M * np.sign(np.diag(R))
    else:
        M = G / np.sqrt(cfg.d)

    labels = np.repeat(np.arange(n_classes), cfg.n_per_class)
    noise = rng.standard_normal((cfg.d, labels.size))
    X = M @ S[:, labels] + cfg.noise_sigma * noise

    order = rng.permutation(n_classes)
    seen = tuple(sorted(int(c) for c in order[:cfg.C_seen]))
    unseen = tuple(sorted(int(c) for c in order[cfg.C_seen:]))
    return ZslDataset(X, labels, S, seen, unseen, name=cfg.name)
