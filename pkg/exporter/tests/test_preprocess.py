"""Preprocessing must reproduce the detector's bytes exactly.

The golden corpus shipped with the detector pins the resize, the
normalization, and the content-id rule at the byte level; these tests
replay it without importing the detector package.
"""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from spectra_export import preprocess as pp
from spectra_export.errors import DataError
from spectra_export.identity import content_id

GOLDEN = Path(__file__).resolve().parents[2] / "golden"


def _golden_entries():
    return json.loads((GOLDEN / "expected.json").read_text())


class TestGoldenVectors:
    def test_corpus_present(self):
        entries = _golden_entries()
        assert len(entries) >= 5
        for e in entries:
            assert (GOLDEN / "images" / e["file"]).is_file()

    def test_content_ids_match(self):
        for e in _golden_entries():
            img = pp.decode_image(GOLDEN / "images" / e["file"])
            assert img.shape == (e["height"], e["width"], 3)
            assert content_id(img).hex() == e["content_id"]

    def test_resized_bytes_match(self):
        for e in _golden_entries():
            img = pp.decode_image(GOLDEN / "images" / e["file"])
            resized = pp.resize_to_canonical(img)
            assert resized.shape == (pp.SIDE, pp.SIDE, 3)
            assert hashlib.sha256(resized.tobytes()).hexdigest() == e["resized_sha256"]

    def test_normalized_bytes_match(self):
        for e in _golden_entries():
            x = pp.preprocess(GOLDEN / "images" / e["file"])
            assert x.dtype == np.float32 and x.shape == (3, pp.SIDE, pp.SIDE)
            assert hashlib.sha256(x.tobytes()).hexdigest() == e["normalized_sha256"]

    def test_corner_values_bit_exact(self):
        # float hex round trip: any arithmetic drift at all fails here
        for e in _golden_entries():
            x = pp.preprocess(GOLDEN / "images" / e["file"])
            corner = x[:, :2, :3].ravel()
            expected = [float.fromhex(h) for h in e["normalized_corner_hex"]]
            assert corner.tolist() == expected


class TestResize:
    def test_canonical_input_is_copied(self, image_factory):
        img = image_factory(pp.SIDE, pp.SIDE)
        out = pp.resize_to_canonical(img)
        assert out is not img
        assert np.array_equal(out, img)

    def test_constant_image_stays_constant(self):
        img = np.full((30, 50, 3), 137, np.uint8)
        out = pp.resize_to_canonical(img)
        assert np.all(out == 137)

    def test_rejects_non_rgb(self):
        with pytest.raises(DataError):
            pp.resize_to_canonical(np.zeros((10, 10), np.uint8))
        with pytest.raises(DataError):
            pp.resize_to_canonical(np.zeros((10, 10, 4), np.uint8))
        with pytest.raises(DataError):
            pp.resize_to_canonical(np.zeros((10, 10, 3), np.float32))

    def test_rejects_zero_dimension(self):
        with pytest.raises(DataError):
            pp.resize_to_canonical(np.zeros((0, 10, 3), np.uint8))


class TestNormalize:
    def test_channel_extremes(self):
        img = np.zeros((pp.SIDE, pp.SIDE, 3), np.uint8)
        img[..., 0] = 255
        x = pp.normalize(img)
        assert abs(x[0, 0, 0] - 2.2489) < 1e-4
        assert abs(x[2, 0, 0] - (-1.8044)) < 1e-4

    def test_formula_float64_reference(self, rng):
        img = rng.integers(0, 256, (pp.SIDE, pp.SIDE, 3), np.uint8)
        x = pp.normalize(img)
        mean = [0.485, 0.456, 0.406]
        std = [0.229, 0.224, 0.225]
        for c in range(3):
            ref = (img[..., c].astype(np.float64) / 255.0 - mean[c]) / std[c]
            np.testing.assert_allclose(x[c], ref, rtol=2e-6, atol=2e-6)

    def test_requires_canonical_side(self, image_factory):
        with pytest.raises(DataError):
            pp.normalize(image_factory(64, 64))

    def test_output_contiguous_planar(self, image_factory):
        x = pp.normalize(image_factory(pp.SIDE, pp.SIDE))
        assert x.flags["C_CONTIGUOUS"]
        assert x.shape == (3, pp.SIDE, pp.SIDE)


class TestDecode:
    def test_png_round_trip(self, tmp_path, image_factory):
        img = image_factory(40, 30)
        p = tmp_path / "a.png"
        Image.fromarray(img).save(p)
        assert np.array_equal(pp.decode_image(p), img)

    def test_rgba_flattened_to_rgb(self, tmp_path, image_factory):
        img = image_factory(20, 20)
        rgba = np.dstack([img, np.full((20, 20), 255, np.uint8)])
        p = tmp_path / "a.png"
        Image.fromarray(rgba, "RGBA").save(p)
        assert np.array_equal(pp.decode_image(p), img)

    def test_grayscale_replicated(self, tmp_path, rng):
        g = rng.integers(0, 256, (24, 16), np.uint8)
        p = tmp_path / "g.png"
        Image.fromarray(g, "L").save(p)
        out = pp.decode_image(p)
        assert np.array_equal(out[..., 0], g)
        assert np.array_equal(out[..., 0], out[..., 1])

    def test_garbage_raises(self, tmp_path):
        p = tmp_path / "bad.png"
        p.write_bytes(b"this is not an image")
        with pytest.raises(DataError):
            pp.decode_image(p)

    def test_missing_raises(self, tmp_path):
        with pytest.raises(DataError):
            pp.decode_image(tmp_path / "nope.png")


class TestContentId:
    def test_dimension_prefix_discriminates_transpose(self, rng):
        img = rng.integers(0, 256, (8, 4, 3), np.uint8)
        flipped = np.ascontiguousarray(img.transpose(1, 0, 2))
        assert content_id(img) != content_id(flipped)

    def test_independent_construction(self, rng):
        import struct

        img = rng.integers(0, 256, (5, 7, 3), np.uint8)
        ref = hashlib.sha256(struct.pack("<II", 7, 5) + img.tobytes()).digest()
        assert content_id(img) == ref

    def test_rejects_non_rgb(self):
        with pytest.raises(DataError):
            content_id(np.zeros((4, 4), np.uint8))
