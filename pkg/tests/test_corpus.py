"""Corpus ingestion: preprocessing arithmetic, splits, synthetic data."""

import logging

import numpy as np
import pytest
from PIL import Image

from wgain.corpus import (
    Corpus,
    CorpusConfig,
    decode_image_file,
    load_corpus,
    make_synthetic_corpus,
    normalize_image,
    preprocess_image,
    validate_image,
)
from wgain.errors import IngestionError, ValidationError
from wgain.seeding import named_stream


class TestPreprocess:
    def test_center_crop_columns_256x512(self):
        """256x512 to target 128: the crop must come from columns 128..383."""
        raw = np.zeros((256, 512, 3), dtype=np.uint8)
        raw[:, 128:384] = 255  # paint exactly the expected crop region
        out = preprocess_image(raw, 128)
        assert out.shape == (128, 128, 3)
        assert out.min() == 1.0  # nothing outside the marked region leaked in

        raw2 = np.zeros((256, 512, 3), dtype=np.uint8)
        raw2[:, 127] = 255
        raw2[:, 384] = 255
        out2 = preprocess_image(raw2, 128)
        assert out2.max() == 0.0  # neighbors of the crop region stay out

    def test_uint8_peak_normalizes_to_one(self):
        raw = np.full((128, 128, 3), 255, dtype=np.uint8)
        assert np.array_equal(preprocess_image(raw, 128), np.ones((128, 128, 3), np.float32))

    def test_same_size_resize_is_identity(self, rng):
        raw = (rng.random((128, 128, 3)) * 255).astype(np.uint8)
        out = preprocess_image(raw, 128)
        assert np.max(np.abs(out - raw.astype(np.float32) / 255.0)) == 0.0

    def test_idempotent_on_conforming_images(self, rng):
        img = rng.random((64, 64, 3)).astype(np.float32)
        once = preprocess_image(img, 64)
        twice = preprocess_image(once, 64)
        assert np.array_equal(once, twice)
        assert np.max(np.abs(once - img)) < 1e-6

    def test_grayscale_replicates_alpha_drops(self):
        gray = np.full((16, 16), 128, dtype=np.uint8)
        out = preprocess_image(gray, 16)
        assert out.shape == (16, 16, 3)
        assert np.all(out[:, :, 0] == out[:, :, 2])

        rgba = np.zeros((16, 16, 4), dtype=np.uint8)
        rgba[:, :, 3] = 255
        assert preprocess_image(rgba, 16).shape == (16, 16, 3)

    def test_output_stays_in_unit_range(self, rng):
        raw = (rng.random((50, 70, 3)) * 65535).astype(np.uint16)
        out = preprocess_image(raw, 32)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_float_input_clipped_not_scaled(self):
        raw = np.full((8, 8, 3), 1.5, dtype=np.float32)
        assert preprocess_image(raw, 8).max() == 1.0

    def test_zero_area_rejected(self):
        with pytest.raises(ValidationError):
            preprocess_image(np.zeros((0, 4, 3), dtype=np.uint8), 8)

    def test_normalize_keeps_original_size(self):
        raw = np.full((20, 30, 3), 51, dtype=np.uint8)
        out = normalize_image(raw)
        assert out.shape == (20, 30, 3)
        assert abs(out[0, 0, 0] - 0.2) < 1e-6


class TestValidateImage:
    def test_accepts_conforming(self, rng):
        validate_image(rng.random((8, 8, 3)).astype(np.float32))

    def test_rejects_out_of_range_and_nan(self):
        bad = np.full((4, 4, 3), 2.0, dtype=np.float32)
        with pytest.raises(ValidationError):
            validate_image(bad)
        nan = np.zeros((4, 4, 3), dtype=np.float32)
        nan[0, 0, 0] = np.nan
        with pytest.raises(ValidationError):
            validate_image(nan)


class TestDecodeImageFile:
    def test_decodes_png(self, tmp_path, rng):
        arr = (rng.random((12, 9, 3)) * 255).astype(np.uint8)
        p = tmp_path / "a.png"
        Image.fromarray(arr).save(p)
        assert np.array_equal(decode_image_file(p), arr)

    def test_error_carries_path(self, tmp_path):
        p = tmp_path / "broken.png"
        p.write_bytes(b"not a png")
        with pytest.raises(IngestionError, match="broken.png"):
            decode_image_file(p)


def _write_corpus_dir(path, n, rng, side=24):
    for i in range(n):
        arr = (rng.random((side, side, 3)) * 255).astype(np.uint8)
        Image.fromarray(arr).save(path / f"img_{i:03d}.png")


class TestLoadCorpus:
    def test_split_8_2(self, tmp_path, rng):
        _write_corpus_dir(tmp_path, 10, rng)
        cfg = CorpusConfig(source_dir=tmp_path, target_side=16, split=(0.8, 0.2))
        train, eval_ = load_corpus(cfg)
        assert len(train) == 8 and len(eval_) == 2
        assert train[0].shape == (16, 16, 3)

    def test_same_seed_same_ordering(self, tmp_path, rng):
        _write_corpus_dir(tmp_path, 6, rng)
        cfg = CorpusConfig(source_dir=tmp_path, target_side=16, shuffle_seed=3)
        t1, _ = load_corpus(cfg)
        t2, _ = load_corpus(cfg)
        for i in range(len(t1)):
            assert np.array_equal(t1[i], t2[i])

    def test_single_file_goes_to_train_with_warning(self, tmp_path, rng, caplog):
        _write_corpus_dir(tmp_path, 1, rng)
        cfg = CorpusConfig(source_dir=tmp_path, target_side=16, split=(0.8, 0.2))
        with caplog.at_level(logging.WARNING):
            train, eval_ = load_corpus(cfg)
        assert len(train) == 1 and len(eval_) == 0
        assert any("eval" in r.message for r in caplog.records)

    def test_split_partitions(self, tmp_path, rng):
        _write_corpus_dir(tmp_path, 7, rng)
        cfg = CorpusConfig(source_dir=tmp_path, target_side=16, split=(0.6, 0.4))
        train, eval_ = load_corpus(cfg)
        assert len(train) + len(eval_) <= 7
        seen = {arr.tobytes() for arr in (list(train.load_all()) + list(eval_.load_all()))}
        assert len(seen) == len(train) + len(eval_)

    def test_empty_dir_rejected(self, tmp_path):
        with pytest.raises(IngestionError):
            load_corpus(CorpusConfig(source_dir=tmp_path))

    def test_env_var_fallback(self, tmp_path, rng, monkeypatch):
        _write_corpus_dir(tmp_path, 2, rng)
        monkeypatch.setenv("WGAIN_DATA_DIR", str(tmp_path))
        cfg = CorpusConfig(source_dir=None, target_side=16)
        train, _ = load_corpus(cfg)
        assert len(train) >= 1


class TestCorpusConfig:
    def test_fraction_validation(self):
        with pytest.raises(ValidationError):
            CorpusConfig(split=(0.9, 0.2))
        with pytest.raises(ValidationError):
            CorpusConfig(split=(0.0, 0.5))
        with pytest.raises(ValidationError):
            CorpusConfig(target_side=4)


class TestSyntheticCorpus:
    def test_shape_and_range(self):
        c = make_synthetic_corpus(16, 32, named_stream(0, "syn"))
        assert len(c) == 16
        all_ = c.load_all()
        assert all_.shape == (16, 32, 32, 3)
        assert all_.min() >= 0.0 and all_.max() <= 1.0

    def test_same_seed_bit_identical(self):
        a = make_synthetic_corpus(6, 16, named_stream(5, "syn2")).load_all()
        b = make_synthetic_corpus(6, 16, named_stream(5, "syn2")).load_all()
        assert np.array_equal(a, b)

    def test_gradient_images_strictly_monotone(self):
        # every third image starting at 0 is a gradient; monotone along one axis
        c = make_synthetic_corpus(3, 32, named_stream(7, "syn3"))
        img = c[0]
        dr = np.diff(img, axis=0)
        dc = np.diff(img, axis=1)
        assert (dr > 0).all() or (dc > 0).all()

    def test_requires_positive_n(self):
        with pytest.raises(ValidationError):
            make_synthetic_corpus(0, 16, named_stream(0, "syn4"))
