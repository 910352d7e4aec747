"""Feature-vector datasets: binary I/O, synthetic generation, class statistics.

On-disk layout (bit-exact contract):
  feature file   magic b"GPALFT01", little-endian u64 N, u64 D, then N*D
                 little-endian IEEE-754 float32 values row-major.
  sidecar        same stem with suffix ".meta.json"; UTF-8 JSON object with
                 "class_names" (list of str) and "samples" (list of
                 {"id", "label", "split", "image_uri"}), one entry per row.

Features stay float32 in memory and are promoted to float64 at the GP math
boundary.  Labels may be withheld per sample (null in the sidecar, -1 in the
in-memory array) so feature files can ship without answers in oracle mode.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, TruncationError, ValidationError
from .rng import STREAM_SYNTH, derive_rng

MAGIC = b"GPALFT01"
SPLIT_TRAIN_POOL = "train_pool"
SPLIT_TEST = "test"
_SPLITS = (SPLIT_TRAIN_POOL, SPLIT_TEST)
NO_LABEL = -1


@dataclass
class FeatureDataset:
    """Immutable N x D feature matrix with labels, ids, and split tags."""

    features: np.ndarray  # (N, D) float32
    labels: np.ndarray  # (N,) int64, NO_LABEL where withheld
    sample_ids: list[str]
    class_names: list[str]
    splits: list[str]  # per-sample, "train_pool" or "test"
    image_uris: list[str | None] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.features = np.ascontiguousarray(self.features, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.image_uris is None:
            self.image_uris = [None] * len(self.sample_ids)
        self._validate()
        self.features.flags.writeable = False
        self.labels.flags.writeable = False

    def _validate(self) -> None:
        n = self.features.shape[0]
        if self.features.ndim != 2 or self.features.shape[1] < 1:
            raise ValidationError("features must be a 2-d matrix with D >= 1")
        if len(self.class_names) < 2:
            raise ValidationError("need at least 2 classes")
        if len(set(self.class_names)) != len(self.class_names):
            raise ValidationError("class_names must be unique")
        for name, length in (
            ("labels", len(self.labels)),
            ("sample_ids", len(self.sample_ids)),
            ("splits", len(self.splits)),
            ("image_uris", len(self.image_uris)),
        ):
            if length != n:
                raise ValidationError(f"{name} has {length} entries for {n} rows")
        if len(set(self.sample_ids)) != n:
            raise ValidationError("sample_ids must be unique")
        c = len(self.class_names)
        present = self.labels[self.labels != NO_LABEL]
        if present.size and (present.min() < 0 or present.max() >= c):
            raise ValidationError(f"labels must be in [0, {c})")
        bad = set(self.splits) - set(_SPLITS)
        if bad:
            raise ValidationError(f"unknown split tags: {sorted(bad)}")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def split_indices(self, split: str) -> np.ndarray:
        if split not in _SPLITS:
            raise ValidationError(f"unknown split {split!r}")
        return np.array([i for i, s in enumerate(self.splits) if s == split], dtype=np.int64)

    def train_pool_indices(self) -> np.ndarray:
        return self.split_indices(SPLIT_TRAIN_POOL)

    def test_indices(self) -> np.ndarray:
        return self.split_indices(SPLIT_TEST)

    def has_label(self, index: int) -> bool:
        return int(self.labels[index]) != NO_LABEL

    def features64(self, indices: np.ndarray | None = None) -> np.ndarray:
        """Rows promoted to float64 for GP math."""
        if indices is None:
            return self.features.astype(np.float64)
        return self.features[np.asarray(indices, dtype=np.int64)].astype(np.float64)

    def index_of_id(self, sample_id: str) -> int:
        try:
            return self._id_index[sample_id]
        except AttributeError:
            self._id_index = {s: i for i, s in enumerate(self.sample_ids)}
            return self._id_index[sample_id]
        except KeyError:
            raise ValidationError(f"unknown sample id {sample_id!r}") from None

    def equals(self, other: "FeatureDataset") -> bool:
        return (
            np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and self.sample_ids == other.sample_ids
            and self.class_names == other.class_names
            and self.splits == other.splits
            and self.image_uris == other.image_uris
        )


@dataclass
class ClassStats:
    """Per-class counts and fractions over some index subset."""

    counts: np.ndarray  # (C,) int64
    fractions: np.ndarray  # (C,) float64
    total: int


@dataclass
class SynthSpec:
    """Recipe for Gaussian-blob datasets with a controlled class skew."""

    n_per_class: list[int]
    dim: int
    centers: np.ndarray | None = None  # (C, D); None = seeded sphere placement
    spread: float = 1.0
    seed: int = 0
    test_n_per_class: list[int] | None = None  # extra rows tagged "test"
    class_names: list[str] | None = None

    def __post_init__(self) -> None:
        if len(self.n_per_class) < 2:
            raise ValidationError("need at least 2 classes")
        if any(n < 1 for n in self.n_per_class):
            raise ValidationError("n_per_class entries must be >= 1")
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if not self.spread > 0.0:
            raise ValidationError("spread must be positive")
        if self.test_n_per_class is not None:
            if len(self.test_n_per_class) != len(self.n_per_class):
                raise ValidationError("test_n_per_class length must match n_per_class")
            if any(n < 0 for n in self.test_n_per_class):
                raise ValidationError("test_n_per_class entries must be >= 0")
        if self.centers is not None:
            self.centers = np.asarray(self.centers, dtype=np.float64)
            if self.centers.shape != (len(self.n_per_class), self.dim):
                raise ValidationError(
                    f"centers must be {len(self.n_per_class)}x{self.dim}"
                )


def default_synth_spec(seed: int = 0) -> SynthSpec:
    """Desk-scale stand-in for an imbalanced embedding dataset.

    Three classes with a ~6% rare class, 16 dimensions, unit spread, centers
    on a radius-3 sphere; a quarter-size test draw per class.
    """
    return SynthSpec(
        n_per_class=[1400, 480, 120],
        dim=16,
        spread=1.0,
        seed=seed,
        test_n_per_class=[350, 120, 30],
    )


def _sphere_centers(c: int, d: int, rng: np.random.Generator, radius: float = 3.0) -> np.ndarray:
    raw = rng.standard_normal((c, d))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return radius * raw / norms


def synth_blobs(spec: SynthSpec) -> FeatureDataset:
    """Deterministic Gaussian blobs per class, fully labeled.

    Train-pool rows come first (grouped by class), then optional test rows.
    """
    c = len(spec.n_per_class)
    rng = derive_rng(spec.seed, STREAM_SYNTH)
    centers = spec.centers if spec.centers is not None else _sphere_centers(c, spec.dim, rng)

    test_counts = spec.test_n_per_class or [0] * c
    blocks: list[np.ndarray] = []
    labels: list[int] = []
    splits: list[str] = []
    for split, counts in ((SPLIT_TRAIN_POOL, spec.n_per_class), (SPLIT_TEST, test_counts)):
        for k, n_k in enumerate(counts):
            if n_k == 0:
                continue
            blocks.append(centers[k] + spec.spread * rng.standard_normal((n_k, spec.dim)))
            labels.extend([k] * n_k)
            splits.extend([split] * n_k)

    features = np.concatenate(blocks, axis=0).astype(np.float32)
    names = spec.class_names or [f"class_{k}" for k in range(c)]
    ids = [f"synth-{i:06d}" for i in range(features.shape[0])]
    return FeatureDataset(
        features=features,
        labels=np.array(labels, dtype=np.int64),
        sample_ids=ids,
        class_names=names,
        splits=splits,
    )


def class_stats(ds: FeatureDataset, subset: np.ndarray) -> ClassStats:
    """Counts and fractions per class over ``subset`` (labels required)."""
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise ValidationError("class_stats of an empty subset")
    if subset.min() < 0 or subset.max() >= ds.n_samples:
        raise ValidationError("subset index out of range")
    labels = ds.labels[subset]
    if np.any(labels == NO_LABEL):
        raise ValidationError("subset contains unlabeled samples")
    counts = np.bincount(labels, minlength=ds.n_classes).astype(np.int64)
    return ClassStats(counts=counts, fractions=counts / subset.size, total=int(subset.size))


def l2_normalize(ds: FeatureDataset) -> FeatureDataset:
    """Copy with rows scaled to unit Euclidean norm (zero rows left alone)."""
    feats = ds.features.astype(np.float64)
    norms = np.linalg.norm(feats, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return FeatureDataset(
        features=(feats / norms).astype(np.float32),
        labels=ds.labels.copy(),
        sample_ids=list(ds.sample_ids),
        class_names=list(ds.class_names),
        splits=list(ds.splits),
        image_uris=list(ds.image_uris),
    )


def sidecar_path(path: Path | str) -> Path:
    """Metadata path: the feature file's final suffix replaced by .meta.json."""
    path = Path(path)
    if path.suffix:
        return path.with_suffix(".meta.json")
    return path.with_name(path.name + ".meta.json")


def save_features(ds: FeatureDataset, path: Path | str) -> None:
    """Write the binary feature file and its JSON sidecar."""
    path = Path(path)
    n, d = ds.features.shape
    payload = np.ascontiguousarray(ds.features, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", n, d))
        fh.write(payload)
    samples = [
        {
            "id": ds.sample_ids[i],
            "label": None if ds.labels[i] == NO_LABEL else int(ds.labels[i]),
            "split": ds.splits[i],
            "image_uri": ds.image_uris[i],
        }
        for i in range(n)
    ]
    meta = {"class_names": list(ds.class_names), "samples": samples}
    sidecar_path(path).write_text(json.dumps(meta, indent=1), encoding="utf-8")


def load_features(path: Path | str) -> FeatureDataset:
    """Read a feature file plus sidecar; inverse of :func:`save_features`."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if len(raw) < len(MAGIC) + 16:
        raise DataFormatError(f"{path} is too short to hold a header")
    if raw[: len(MAGIC)] != MAGIC:
        raise DataFormatError(
            f"{path} has magic {raw[:len(MAGIC)]!r}, expected {MAGIC!r}"
        )
    n, d = struct.unpack_from("<QQ", raw, len(MAGIC))
    expected = len(MAGIC) + 16 + n * d * 4
    if len(raw) < expected:
        raise TruncationError(
            f"{path} declares {n}x{d} float32 values but holds "
            f"{len(raw) - len(MAGIC) - 16} payload bytes, expected {n * d * 4}"
        )
    if len(raw) > expected:
        raise DataFormatError(f"{path} has {len(raw) - expected} trailing bytes")
    features = np.frombuffer(raw, dtype="<f4", count=n * d, offset=len(MAGIC) + 16)
    features = features.reshape(n, d).copy()

    meta_path = sidecar_path(path)
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataFormatError(f"cannot read sidecar {meta_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"sidecar {meta_path} is not valid JSON: {exc}") from exc
    for key in ("class_names", "samples"):
        if key not in meta:
            raise DataFormatError(f"sidecar {meta_path} is missing {key!r}")
    samples = meta["samples"]
    if len(samples) != n:
        raise DataFormatError(
            f"sidecar lists {len(samples)} samples, feature file holds {n} rows"
        )
    labels = np.array(
        [NO_LABEL if s.get("label") is None else int(s["label"]) for s in samples],
        dtype=np.int64,
    )
    try:
        return FeatureDataset(
            features=features,
            labels=labels,
            sample_ids=[str(s["id"]) for s in samples],
            class_names=[str(c) for c in meta["class_names"]],
            splits=[str(s["split"]) for s in samples],
            image_uris=[s.get("image_uri") for s in samples],
        )
    except KeyError as exc:
        raise DataFormatError(f"sidecar sample entry is missing {exc}") from exc
