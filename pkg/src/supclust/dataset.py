"""Embedding datasets: file ingestion and synthetic long-tail blob generation.

Two on-disk formats are supported:

* ``csv`` -- one sample per line, d comma-separated decimal floats, and an
  optional trailing integer label column. No header line.
* ``raw_f32`` -- binary: magic ``SUPC``, format version u32=1, n (u64),
  d (u64), ``has_labels`` (u8), then n*d little-endian f32 coordinates in
  row-major order, followed by n little-endian u32 labels when
  ``has_labels`` is 1.

Coordinates are stored as 32-bit floats in the binary format; all internal
arithmetic is done in float64.
"""

import math
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, DataFormatError
from .validation import as_float_matrix, check_labels, seeded_rng

MAGIC = b"SUPC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQQB")
_INT_TOKEN = re.compile(r"[+-]?\d+")

FORMATS = ("csv", "raw_f32")


@dataclass(frozen=True)
class EmbeddingSet:
    """An n x d matrix of sample embeddings with optional class labels.

    Labels are consumed only by the simulation harness; query strategies
    never read them. Instances are immutable and safe to share across
    concurrent strategy evaluations.
    """

    embeddings: np.ndarray
    labels: np.ndarray | None = None
    num_classes: int | None = None

    def __post_init__(self):
        emb = as_float_matrix(self.embeddings, "embeddings", copy=True)
        labels = self.labels
        num_classes = self.num_classes
        if num_classes is not None and int(num_classes) < 1:
            raise ValueError("num_classes must be positive")
        if labels is not None:
            labels = check_labels(labels, emb.shape[0], num_classes)
            if num_classes is None:
                num_classes = int(labels.max()) + 1
            labels.flags.writeable = False
        emb.flags.writeable = False
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "num_classes", None if num_classes is None else int(num_classes))

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def without_labels(self) -> "EmbeddingSet":
        """A view of the same coordinates with labels stripped."""
        return EmbeddingSet(self.embeddings)


@dataclass(frozen=True)
class ImbalanceProfile:
    """Exponential long-tail class-size profile.

    Class c receives ``round(max_per_class * imbalance_factor**(-c/(C-1)))``
    samples, so class 0 holds exactly ``max_per_class`` and the last class
    roughly ``max_per_class / imbalance_factor``.
    """

    num_classes: int
    max_per_class: int
    imbalance_factor: float = 1.0

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        if self.max_per_class < 1:
            raise ValueError("max_per_class must be positive")
        if self.imbalance_factor < 1.0:
            raise ValueError("imbalance_factor must be >= 1")

    def class_counts(self) -> np.ndarray:
        """Per-class sample counts; raises ConfigError if any class is empty."""
        if self.num_classes == 1:
            return np.array([self.max_per_class], dtype=np.int64)
        counts = np.empty(self.num_classes, dtype=np.int64)
        for c in range(self.num_classes):
            decay = self.imbalance_factor ** (-c / (self.num_classes - 1))
            counts[c] = int(math.floor(self.max_per_class * decay + 0.5))
        if counts.min() < 1:
            empty = int(np.flatnonzero(counts < 1)[0])
            raise ConfigError(
                f"profile assigns 0 samples to class {empty}; "
                f"raise max_per_class or lower imbalance_factor"
            )
        return counts

    @property
    def total(self) -> int:
        return int(self.class_counts().sum())


def make_blobs(
    profile: ImbalanceProfile,
    dim: int,
    center_spread: float,
    cluster_std: float,
    seed: int,
) -> EmbeddingSet:
    """Synthesize labeled Gaussian blobs following an imbalance profile.

    Class centers are drawn uniformly from ``[-center_spread, center_spread]^dim``
    and each sample is its class center plus isotropic Gaussian noise of
    standard deviation ``cluster_std``. Pure function of its arguments:
    identical seeds produce bitwise-identical output.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if center_spread <= 0:
        raise ValueError("center_spread must be positive")
    if cluster_std <= 0:
        raise ValueError("cluster_std must be positive")
    counts = profile.class_counts()
    rng = seeded_rng(seed)
    centers = rng.uniform(-center_spread, center_spread, size=(profile.num_classes, dim))
    blocks = []
    for c, count in enumerate(counts):
        noise = rng.normal(0.0, cluster_std, size=(int(count), dim))
        blocks.append(centers[c] + noise)
    embeddings = np.concatenate(blocks, axis=0)
    labels = np.repeat(np.arange(profile.num_classes, dtype=np.int64), counts)
    return EmbeddingSet(embeddings, labels=labels, num_classes=profile.num_classes)


def l2_normalize(data: EmbeddingSet) -> EmbeddingSet:
    """Scale every embedding row to unit L2 norm (zero rows are left alone)."""
    norms = np.linalg.norm(data.embeddings, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return EmbeddingSet(data.embeddings / norms, labels=data.labels, num_classes=data.num_classes)


def load_embeddings(path, fmt: str) -> EmbeddingSet:
    """Load an EmbeddingSet from ``path`` in the given format."""
    _check_format(fmt)
    path = Path(path)
    if fmt == "csv":
        return _load_csv(path)
    return _load_raw(path)


def save_embeddings(data: EmbeddingSet, path, fmt: str) -> None:
    """Serialize an EmbeddingSet to ``path`` in the given format."""
    _check_format(fmt)
    path = Path(path)
    if fmt == "csv":
        _save_csv(data, path)
    else:
        _save_raw(data, path)


def _check_format(fmt: str) -> None:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def _load_csv(path: Path) -> EmbeddingSet:
    raw_lines = path.read_text(encoding="utf-8").splitlines()
    lines = [(lineno, text) for lineno, text in enumerate(raw_lines, start=1) if text.strip()]
    if not lines:
        raise DataFormatError(f"{path}: no samples found")

    rows = [text.split(",") for _, text in lines]
    width = len(rows[0])
    for (lineno, _), fields in zip(lines, rows):
        if len(fields) != width:
            raise DataFormatError(
                f"{path}: line {lineno}: expected {width} fields, got {len(fields)}"
            )

    # The trailing column is a label column iff every row ends in an
    # integer literal and at least one coordinate column remains.
    has_labels = width >= 2 and all(_INT_TOKEN.fullmatch(fields[-1].strip()) for fields in rows)
    d = width - 1 if has_labels else width

    embeddings = np.empty((len(rows), d), dtype=np.float64)
    labels = np.empty(len(rows), dtype=np.int64) if has_labels else None
    for r, ((lineno, _), fields) in enumerate(zip(lines, rows)):
        for j in range(d):
            token = fields[j].strip()
            try:
                embeddings[r, j] = float(token)
            except ValueError:
                raise DataFormatError(
                    f"{path}: line {lineno}, column {j + 1}: "
                    f"cannot parse {token!r} as a number"
                ) from None
        if has_labels:
            labels[r] = int(fields[-1].strip())
            if labels[r] < 0:
                raise DataFormatError(f"{path}: row {r}: negative class label {labels[r]}")
        if not np.isfinite(embeddings[r]).all():
            raise DataFormatError(f"{path}: row {r}: non-finite embedding value")
    return EmbeddingSet(embeddings, labels=labels)


def _save_csv(data: EmbeddingSet, path: Path) -> None:
    lines = []
    for r in range(data.n):
        fields = [f"{v:.10g}" for v in data.embeddings[r]]
        if data.labels is not None:
            fields.append(str(int(data.labels[r])))
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_raw(path: Path) -> EmbeddingSet:
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise DataFormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, n, d, has_labels = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported format version {version}")
    if has_labels not in (0, 1):
        raise DataFormatError(f"{path}: has_labels flag must be 0 or 1, got {has_labels}")
    if n < 1 or d < 1:
        raise DataFormatError(f"{path}: invalid shape n={n}, d={d}")
    expected = _HEADER.size + 4 * n * d + (4 * n if has_labels else 0)
    if len(blob) != expected:
        raise DataFormatError(f"{path}: expected {expected} bytes, found {len(blob)}")

    coords = np.frombuffer(blob, dtype="<f4", count=n * d, offset=_HEADER.size)
    embeddings = coords.reshape(n, d).astype(np.float64)
    bad_rows = np.flatnonzero(~np.isfinite(embeddings).all(axis=1))
    if bad_rows.size:
        raise DataFormatError(f"{path}: row {int(bad_rows[0])}: non-finite embedding value")
    labels = None
    if has_labels:
        labels = np.frombuffer(blob, dtype="<u4", count=n, offset=_HEADER.size + 4 * n * d)
        labels = labels.astype(np.int64)
    return EmbeddingSet(embeddings, labels=labels)


def _save_raw(data: EmbeddingSet, path: Path) -> None:
    has_labels = 1 if data.labels is not None else 0
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, data.n, data.dim, has_labels)
    payload = [header, data.embeddings.astype("<f4").tobytes()]
    if has_labels:
        payload.append(data.labels.astype("<u4").tobytes())
    path.write_bytes(b"".join(payload))
