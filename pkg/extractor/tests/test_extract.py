"""Extractor: crop math, determinism, and the cross-package format contract.

The round-trip tests validate output through the engine's own loader, which
is the single source of truth for the feature-file format.
"""

import csv
import warnings

import numpy as np
import pytest
from PIL import Image

from gpal.data import load_features, save_features
from gpal_extract.backbone import feature_dim, load_backbone
from gpal_extract.cli import main as cli_main
from gpal_extract.extract import ExtractSpec, extract
from gpal_extract.preprocess import prepare, top_crop_box

BACKBONE = "resnet18"  # trunk choice only changes D; keeps the suite quick
SIDE = 64


def write_images(root, per_class=3, classes=("benign", "lesion")):
    rng = np.random.default_rng(0)
    for class_name in classes:
        class_dir = root / class_name
        class_dir.mkdir(parents=True)
        for i in range(per_class):
            pixels = rng.integers(0, 255, size=(48, 40), dtype=np.uint8)
            Image.fromarray(pixels, mode="L").save(class_dir / f"{class_name}_{i}.png")


def spec_for(root, out, **kw):
    base = dict(
        input_root=root,
        output_path=out,
        backbone=BACKBONE,
        crop_fraction=0.15,
        side=SIDE,
        batch_size=4,
    )
    base.update(kw)
    return ExtractSpec(**base)


class TestPreprocess:
    def test_top_crop_keeps_documented_rows(self):
        # 100-pixel-tall image at 0.15: rows 15..99 survive
        assert top_crop_box(100, 0.15) == (15, 100)
        assert top_crop_box(48, 0.0) == (0, 48)

    def test_crop_removes_top_content(self):
        # wide frame so the centering square keeps every row: only the top
        # crop can remove the burned-in header band
        pixels = np.zeros((60, 100), dtype=np.uint8)
        pixels[:9, :] = 255
        out = prepare(Image.fromarray(pixels, mode="L"), 0.15, SIDE)
        assert out.shape == (3, SIDE, SIDE)
        for channel in out:
            assert float(np.ptp(channel)) == 0.0  # header gone, uniform black
        untouched = prepare(Image.fromarray(pixels, mode="L"), 0.0, SIDE)
        assert float(np.ptp(untouched[0])) > 0.0  # without the crop it remains

    def test_grayscale_replicated_to_three_channels(self):
        pixels = np.random.default_rng(1).integers(0, 255, (40, 40), dtype=np.uint8)
        out = prepare(Image.fromarray(pixels, mode="L"), 0.0, SIDE)
        # identical pixels per channel before normalization, so channel
        # differences reduce to the normalization constants
        denorm = out * np.array([0.229, 0.224, 0.225], dtype=np.float32)[:, None, None]
        denorm += np.array([0.485, 0.456, 0.406], dtype=np.float32)[:, None, None]
        np.testing.assert_allclose(denorm[0], denorm[1], atol=1e-6)
        np.testing.assert_allclose(denorm[0], denorm[2], atol=1e-6)


class TestSpecValidation:
    def test_crop_range_enforced(self, tmp_path):
        with pytest.raises(ValueError, match="crop"):
            spec_for(tmp_path, tmp_path / "o.gpalft", crop_fraction=0.5)

    def test_unknown_backbone_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="backbone"):
            spec_for(tmp_path, tmp_path / "o.gpalft", backbone="vgg-zillion")


class TestExtract:
    def test_output_passes_engine_loader(self, tmp_path):
        root = tmp_path / "imgs"
        write_images(root)
        out = tmp_path / "features.gpalft"
        report = extract(spec_for(root, out))
        assert report.written == 6

        ds = load_features(out)
        assert ds.n_samples == 6
        assert ds.dim == feature_dim(BACKBONE)
        assert ds.class_names == ["benign", "lesion"]
        assert ds.sample_ids == sorted(ds.sample_ids)
        assert all(split == "train_pool" for split in ds.splits)
        assert ds.image_uris[0] == ds.sample_ids[0]

        # engine-side re-save reproduces the feature file bit for bit and
        # the dataset survives a full save/load cycle unchanged
        resaved = tmp_path / "resaved.gpalft"
        save_features(ds, resaved)
        assert resaved.read_bytes() == out.read_bytes()
        assert load_features(resaved).equals(ds)

    def test_same_directory_twice_is_byte_identical(self, tmp_path):
        root = tmp_path / "imgs"
        write_images(root)
        out_a, out_b = tmp_path / "a.gpalft", tmp_path / "b.gpalft"
        extract(spec_for(root, out_a))
        extract(spec_for(root, out_b))
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_labels_never_influence_features(self, tmp_path):
        root = tmp_path / "imgs"
        write_images(root)
        labeled_out = tmp_path / "labeled.gpalft"
        extract(spec_for(root, labeled_out))

        # same files through an unlabeled manifest: identical payload bytes
        manifest = tmp_path / "manifest.csv"
        with open(manifest, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["path", "label"])
            for path in sorted(root.rglob("*.png")):
                writer.writerow([path.relative_to(root).as_posix(), ""])
        unlabeled_out = tmp_path / "unlabeled.gpalft"
        extract(spec_for(root, unlabeled_out, manifest=manifest))

        assert labeled_out.read_bytes() == unlabeled_out.read_bytes()
        ds = load_features(unlabeled_out)
        assert all(not ds.has_label(i) for i in range(ds.n_samples))

    def test_manifest_with_labels_and_splits(self, tmp_path):
        root = tmp_path / "imgs"
        write_images(root, per_class=2)
        manifest = tmp_path / "manifest.csv"
        rows = sorted(p.relative_to(root).as_posix() for p in root.rglob("*.png"))
        with open(manifest, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["path", "label", "split"])
            for i, rel in enumerate(rows):
                writer.writerow([rel, rel.split("/")[0], "test" if i == 0 else "train_pool"])
        out = tmp_path / "features.gpalft"
        extract(spec_for(root, out, manifest=manifest))
        ds = load_features(out)
        assert ds.splits.count("test") == 1
        assert ds.class_names == ["benign", "lesion"]

    def test_unreadable_image_skipped_with_warning(self, tmp_path, caplog):
        root = tmp_path / "imgs"
        write_images(root, per_class=2)
        (root / "benign" / "broken.png").write_bytes(b"not an image at all")
        out = tmp_path / "features.gpalft"
        with caplog.at_level("WARNING", logger="gpal_extract"):
            report = extract(spec_for(root, out))
        assert report.written == 4
        assert report.skipped == ["benign/broken.png"]
        assert "skipping" in caplog.text
        assert load_features(out).n_samples == 4

    def test_zero_usable_images_fails(self, tmp_path):
        root = tmp_path / "imgs"
        (root / "only").mkdir(parents=True)
        (root / "only" / "broken.png").write_bytes(b"junk")
        with pytest.raises(RuntimeError, match="no usable images"):
            extract(spec_for(root, tmp_path / "o.gpalft"))

    def test_missing_class_dirs_fails(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(FileNotFoundError):
            extract(spec_for(tmp_path / "empty", tmp_path / "o.gpalft"))


class TestCli:
    def test_end_to_end(self, tmp_path, capsys):
        root = tmp_path / "imgs"
        write_images(root, per_class=2)
        out = tmp_path / "features.gpalft"
        code = cli_main(
            ["--in", str(root), "--out", str(out), "--crop", "0.15", "--size", str(SIDE), "--backbone", BACKBONE]
        )
        assert code == 0
        assert "wrote 4 rows" in capsys.readouterr().out
        assert load_features(out).n_samples == 4

    def test_bad_crop_exits_one(self, tmp_path):
        assert cli_main(["--in", str(tmp_path), "--out", str(tmp_path / "o"), "--crop", "0.9"]) == 1


def test_backbone_dims():
    assert feature_dim("resnet50") == 2048
    assert feature_dim("resnet18") == 512


def test_backbone_is_frozen_and_deterministic():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # torchvision may warn about weights=None
        a = load_backbone(BACKBONE)
        b = load_backbone(BACKBONE)
    pa = list(a.parameters())
    pb = list(b.parameters())
    assert all(not p.requires_grad for p in pa)
    assert all((x == y).all() for x, y in zip(pa, pb))
