"""Dataset module: binary round trips, synthetic blobs, class statistics."""

import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpal.data import (
    MAGIC,
    NO_LABEL,
    FeatureDataset,
    SynthSpec,
    class_stats,
    l2_normalize,
    load_features,
    save_features,
    sidecar_path,
    synth_blobs,
)
from gpal.errors import DataFormatError, TruncationError, ValidationError


def make_ds(n=6, d=3, c=2, with_uris=False, seed=0) -> FeatureDataset:
    rng = np.random.default_rng(seed)
    return FeatureDataset(
        features=rng.standard_normal((n, d)).astype(np.float32),
        labels=rng.integers(0, c, n),
        sample_ids=[f"s{i}" for i in range(n)],
        class_names=[f"c{k}" for k in range(c)],
        splits=["train_pool"] * (n - 1) + ["test"],
        image_uris=[f"img/{i}.png" for i in range(n)] if with_uris else None,
    )


class TestValidation:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValidationError, match="unique"):
            FeatureDataset(
                features=np.zeros((2, 2), dtype=np.float32),
                labels=np.array([0, 1]),
                sample_ids=["a", "a"],
                class_names=["x", "y"],
                splits=["train_pool", "test"],
            )

    def test_label_out_of_range_rejected(self):
        with pytest.raises(ValidationError, match=r"\[0, 2\)"):
            FeatureDataset(
                features=np.zeros((2, 2), dtype=np.float32),
                labels=np.array([0, 2]),
                sample_ids=["a", "b"],
                class_names=["x", "y"],
                splits=["train_pool", "test"],
            )

    def test_withheld_labels_allowed(self):
        ds = FeatureDataset(
            features=np.zeros((2, 2), dtype=np.float32),
            labels=np.array([NO_LABEL, 1]),
            sample_ids=["a", "b"],
            class_names=["x", "y"],
            splits=["train_pool", "test"],
        )
        assert not ds.has_label(0) and ds.has_label(1)

    def test_features_become_read_only(self):
        ds = make_ds()
        with pytest.raises(ValueError):
            ds.features[0, 0] = 5.0


class TestRoundTrip:
    def test_field_for_field_equality(self, tmp_path):
        ds = make_ds(with_uris=True)
        path = tmp_path / "data.gpalft"
        save_features(ds, path)
        assert ds.equals(load_features(path))

    def test_file_layout_is_as_documented(self, tmp_path):
        ds = make_ds(n=2, d=3)
        path = tmp_path / "data.gpalft"
        save_features(ds, path)
        raw = path.read_bytes()
        assert raw[:8] == MAGIC
        n, d = struct.unpack_from("<QQ", raw, 8)
        assert (n, d) == (2, 3)
        assert len(raw) == 8 + 16 + n * d * 4
        assert sidecar_path(path).name == "data.meta.json"

    def test_truncated_payload_reports_truncation(self, tmp_path):
        ds = make_ds(n=10, d=2)
        path = tmp_path / "data.gpalft"
        save_features(ds, path)
        raw = path.read_bytes()
        path.write_bytes(raw[: 24 + 9 * 2 * 4])  # drop the last row
        with pytest.raises(TruncationError):
            load_features(path)

    def test_bad_magic_reports_format_error(self, tmp_path):
        path = tmp_path / "data.gpalft"
        save_features(make_ds(), path)
        raw = bytearray(path.read_bytes())
        raw[:8] = b"NOTGPALF"
        path.write_bytes(bytes(raw))
        with pytest.raises(DataFormatError, match="magic"):
            load_features(path)

    def test_sidecar_count_mismatch_rejected(self, tmp_path):
        path = tmp_path / "data.gpalft"
        save_features(make_ds(n=4), path)
        meta = json.loads(sidecar_path(path).read_text())
        meta["samples"] = meta["samples"][:-1]
        sidecar_path(path).write_text(json.dumps(meta))
        with pytest.raises(DataFormatError, match="3 samples"):
            load_features(path)

    @settings(max_examples=25, deadline=None)
    @given(
        n=st.integers(1, 12),
        d=st.integers(1, 5),
        c=st.integers(2, 4),
        seed=st.integers(0, 2**31),
    )
    def test_round_trip_property(self, tmp_path_factory, n, d, c, seed):
        ds = make_ds(n=n, d=d, c=c, seed=seed)
        path = tmp_path_factory.mktemp("rt") / "x.gpalft"
        save_features(ds, path)
        loaded = load_features(path)
        assert ds.equals(loaded)
        # and the second save is byte-identical
        save_features(loaded, path.with_suffix(".2.gpalft"))
        assert path.read_bytes() == path.with_suffix(".2.gpalft").read_bytes()


class TestSynthBlobs:
    def test_deterministic_for_fixed_seed(self):
        spec = SynthSpec(n_per_class=[100, 100], dim=3, spread=1.0, seed=11)
        a, b = synth_blobs(spec), synth_blobs(spec)
        assert a.equals(b)

    def test_imbalance_matches_spec_counts(self):
        ds = synth_blobs(SynthSpec(n_per_class=[960, 40], dim=2, spread=1.0, seed=0))
        stats = class_stats(ds, ds.train_pool_indices())
        np.testing.assert_allclose(stats.fractions, [0.96, 0.04], atol=1e-12)

    def test_zero_spread_rejected(self):
        with pytest.raises(ValidationError, match="spread"):
            SynthSpec(n_per_class=[10, 10], dim=2, spread=0.0, seed=0)

    def test_test_split_generated(self):
        ds = synth_blobs(
            SynthSpec(n_per_class=[30, 30], dim=2, spread=1.0, seed=0, test_n_per_class=[5, 5])
        )
        assert ds.train_pool_indices().size == 60
        assert ds.test_indices().size == 10


class TestClassStats:
    def test_nerthus_shaped_fractions(self):
        # colonoscopy-style split: 447/2434/867/1252 over a 5000-sample pool
        counts = [447, 2434, 867, 1252]
        ds = FeatureDataset(
            features=np.zeros((5000, 1), dtype=np.float32),
            labels=np.repeat(np.arange(4), counts),
            sample_ids=[f"s{i}" for i in range(5000)],
            class_names=["g0", "g1", "g2", "g3"],
            splits=["train_pool"] * 5000,
        )
        stats = class_stats(ds, ds.train_pool_indices())
        np.testing.assert_allclose(stats.fractions, [0.0894, 0.4868, 0.1734, 0.2504], atol=1e-12)
        assert stats.counts.sum() == 5000

    def test_xray_shaped_fractions(self, tmp_path):
        # chest-x-ray-style file: 3 classes, train 7966/5469/507 plus a test
        # split, loaded from disk like a production metadata file
        train_counts = [7966, 5469, 507]
        test_counts = [885, 594, 100]
        labels = np.concatenate(
            [np.repeat(np.arange(3), train_counts), np.repeat(np.arange(3), test_counts)]
        )
        n = labels.size
        ds = FeatureDataset(
            features=np.zeros((n, 1), dtype=np.float32),
            labels=labels,
            sample_ids=[f"s{i}" for i in range(n)],
            class_names=["Normal", "Pneumonia", "COVID-19"],
            splits=["train_pool"] * 13942 + ["test"] * 1579,
        )
        path = tmp_path / "xray.gpalft"
        save_features(ds, path)
        loaded = load_features(path)
        stats = class_stats(loaded, loaded.train_pool_indices())
        expected = np.array(train_counts) / sum(train_counts)
        np.testing.assert_allclose(stats.fractions, expected, atol=1e-12)
        np.testing.assert_allclose(stats.fractions, [0.5714, 0.3923, 0.0364], atol=5e-5)

    def test_empty_subset_rejected(self):
        ds = make_ds()
        with pytest.raises(ValidationError, match="empty"):
            class_stats(ds, np.array([], dtype=np.int64))

    def test_single_sample_one_hot(self):
        ds = make_ds(n=5, c=3)
        idx = int(np.flatnonzero(ds.labels == ds.labels.max())[0])
        stats = class_stats(ds, np.array([idx]))
        assert stats.counts[ds.labels[idx]] == 1 and stats.counts.sum() == 1

    def test_out_of_range_index_rejected(self):
        ds = make_ds(n=5)
        with pytest.raises(ValidationError, match="range"):
            class_stats(ds, np.array([99]))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31), size=st.integers(1, 50))
    def test_fractions_sum_to_one(self, seed, size):
        ds = make_ds(n=60, c=3, seed=1)
        rng = np.random.default_rng(seed)
        subset = rng.choice(60, size=min(size, 60), replace=False)
        assert abs(class_stats(ds, subset).fractions.sum() - 1.0) <= 1e-9


def test_l2_normalize_rows():
    ds = make_ds(n=8, d=4)
    normed = l2_normalize(ds)
    norms = np.linalg.norm(normed.features.astype(np.float64), axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-6)
