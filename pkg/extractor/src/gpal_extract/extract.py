"""Directory-to-feature-file extraction.

Output is the engine's binary feature format plus JSON sidecar (see the
primary repo's docs/formats.md): magic GPALFT01, u64 N, u64 D, N*D f32
little-endian row-major, and a sidecar listing ids, labels, splits, and
image URIs. Labels are read only to fill the sidecar; feature values are a
pure function of pixels, preprocessing, and weights.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .backbone import RANDOM_WEIGHTS, feature_dim, load_backbone
from .preprocess import prepare

log = logging.getLogger("gpal_extract")

MAGIC = b"GPALFT01"
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp", ".tif", ".tiff"}


@dataclass
class ExtractSpec:
    input_root: Path
    output_path: Path
    backbone: str = "resnet50"
    weights: str = RANDOM_WEIGHTS
    crop_fraction: float = 0.15
    side: int = 224
    batch_size: int = 16
    manifest: Path | None = None

    def __post_init__(self) -> None:
        self.input_root = Path(self.input_root)
        self.output_path = Path(self.output_path)
        if self.manifest is not None:
            self.manifest = Path(self.manifest)
        if not 0.0 <= self.crop_fraction < 0.5:
            raise ValueError("crop_fraction must be in [0, 0.5)")
        if self.side < 16:
            raise ValueError("target side must be at least 16 pixels")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        feature_dim(self.backbone)  # validates the name


@dataclass
class SampleEntry:
    sample_id: str
    path: Path
    label: int | None
    split: str


@dataclass
class ExtractReport:
    written: int
    skipped: list[str] = field(default_factory=list)
    output_path: Path | None = None


def _collect_from_subdirs(root: Path) -> tuple[list[SampleEntry], list[str]]:
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise FileNotFoundError(f"{root} has no class subdirectories (and no manifest given)")
    class_names = [p.name for p in class_dirs]
    entries = []
    for label, class_dir in enumerate(class_dirs):
        for path in sorted(class_dir.rglob("*")):
            if path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES:
                rel = path.relative_to(root).as_posix()
                entries.append(SampleEntry(rel, path, label, "train_pool"))
    return entries, class_names


def _collect_from_manifest(root: Path, manifest: Path) -> tuple[list[SampleEntry], list[str]]:
    entries = []
    named_labels: list[str | None] = []
    with open(manifest, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "path" not in reader.fieldnames:
            raise ValueError(f"{manifest} needs a header with at least a 'path' column")
        for row in reader:
            rel = row["path"].strip()
            label_text = (row.get("label") or "").strip()
            named_labels.append(label_text or None)
            split = (row.get("split") or "train_pool").strip()
            entries.append(SampleEntry(rel, root / rel, None, split))
    class_names = sorted({name for name in named_labels if name is not None})
    lookup = {name: i for i, name in enumerate(class_names)}
    for entry, name in zip(entries, named_labels):
        entry.label = lookup[name] if name is not None else None
    ids = [e.sample_id for e in entries]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{manifest} maps some image to more than one sample id")
    return entries, class_names or ["class_0", "class_1"]


def extract(spec: ExtractSpec) -> ExtractReport:
    """Embed every readable image and write the feature file atomically."""
    if spec.manifest is not None:
        entries, class_names = _collect_from_manifest(spec.input_root, spec.manifest)
    else:
        entries, class_names = _collect_from_subdirs(spec.input_root)
    entries.sort(key=lambda e: e.sample_id)  # row order contract

    model = load_backbone(spec.backbone, spec.weights)
    dim = feature_dim(spec.backbone)

    rows: list[np.ndarray] = []
    kept: list[SampleEntry] = []
    skipped: list[str] = []
    pending: list[tuple[SampleEntry, np.ndarray]] = []

    def flush() -> None:
        if not pending:
            return
        batch = np.stack([tensor for _, tensor in pending])
        import torch

        with torch.no_grad():
            feats = model(torch.from_numpy(batch)).numpy().astype(np.float32)
        for (entry, _), row in zip(pending, feats):
            rows.append(row)
            kept.append(entry)
        pending.clear()

    for entry in entries:
        try:
            with Image.open(entry.path) as image:
                tensor = prepare(image, spec.crop_fraction, spec.side)
        except (OSError, ValueError) as exc:
            log.warning("skipping %s: %s", entry.path, exc)
            skipped.append(entry.sample_id)
            continue
        pending.append((entry, tensor))
        if len(pending) >= spec.batch_size:
            flush()
    flush()

    if not rows:
        raise RuntimeError(f"no usable images under {spec.input_root}")

    features = np.stack(rows)
    assert features.shape == (len(kept), dim)
    _write_outputs(spec, features, kept, class_names, skipped)
    return ExtractReport(written=len(kept), skipped=skipped, output_path=spec.output_path)


def _sidecar_path(path: Path) -> Path:
    if path.suffix:
        return path.with_suffix(".meta.json")
    return path.with_name(path.name + ".meta.json")


def _write_outputs(spec, features, kept, class_names, skipped) -> None:
    n, d = features.shape
    payload = MAGIC + struct.pack("<QQ", n, d) + np.ascontiguousarray(features, dtype="<f4").tobytes()
    meta = {
        "class_names": list(class_names),
        "samples": [
            {
                "id": entry.sample_id,
                "label": entry.label,
                "split": entry.split,
                "image_uri": entry.sample_id,
            }
            for entry in kept
        ],
        "extractor": {
            "backbone": spec.backbone,
            "weights": spec.weights,
            "crop_fraction": spec.crop_fraction,
            "side": spec.side,
            "skipped": skipped,
        },
    }
    spec.output_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = spec.output_path.with_name(spec.output_path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, spec.output_path)
    sidecar = _sidecar_path(spec.output_path)
    tmp_meta = sidecar.with_name(sidecar.name + ".tmp")
    tmp_meta.write_text(json.dumps(meta, indent=1), encoding="utf-8")
    os.replace(tmp_meta, sidecar)
