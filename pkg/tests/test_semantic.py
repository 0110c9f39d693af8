"""Embedding file format and stub descriptor checks."""

import hashlib
import struct

import numpy as np
import pytest

from spectranet import semantic
from spectranet.errors import FormatError, MissingEmbeddingError


def fake_id(n: int) -> bytes:
    return hashlib.sha256(str(n).encode()).digest()


class TestStub:
    def test_deterministic(self):
        cid = fake_id(0)
        a = semantic.stub(cid)
        b = semantic.stub(cid)
        np.testing.assert_array_equal(a, b)
        assert a.dtype == np.float32
        assert a.shape == (768,)

    def test_distinct_ids_distinct_vectors(self):
        a = semantic.stub(fake_id(1))
        b = semantic.stub(fake_id(2))
        assert not np.array_equal(a, b)

    def test_unit_norm(self):
        for n in range(50):
            v = semantic.stub(fake_id(n))
            assert np.linalg.norm(v.astype(np.float64)) == pytest.approx(1.0, abs=1e-5)

    def test_pairwise_near_orthogonal(self):
        # 768-d gaussian directions: cosines concentrate near zero.
        # 10^4 random pairs, allow a small number of mild outliers.
        vecs = np.stack([semantic.stub(fake_id(n)) for n in range(200)]).astype(np.float64)
        g = np.random.default_rng(0)
        violations = 0
        for _ in range(10_000):
            i, j = g.choice(200, 2, replace=False)
            if abs(float(vecs[i] @ vecs[j])) >= 0.3:
                violations += 1
        assert violations <= 10

    def test_single_bit_id_change_decorrelates(self):
        cid = bytearray(fake_id(3))
        a = semantic.stub(bytes(cid))
        cid[0] ^= 1
        b = semantic.stub(bytes(cid))
        assert abs(float(a.astype(np.float64) @ b.astype(np.float64))) < 0.3


class TestEmbeddingFile:
    def test_round_trip_bit_exact(self, tmp_path, rng):
        path = tmp_path / "e.spce"
        recs = [(fake_id(n), rng.standard_normal(768).astype(np.float32)) for n in range(7)]
        assert semantic.write_embeddings(path, recs) == 7
        ef = semantic.EmbeddingFile(path)
        assert len(ef) == 7
        for cid, vec in recs:
            assert cid in ef
            got = ef.lookup(cid)
            assert got.dtype == np.dtype("<f4")
            np.testing.assert_array_equal(got, vec)

    def test_empty_file_round_trip(self, tmp_path):
        path = tmp_path / "empty.spce"
        semantic.write_embeddings(path, [])
        ef = semantic.EmbeddingFile(path)
        assert len(ef) == 0
        assert fake_id(0) not in ef

    def test_missing_id_raises(self, tmp_path, rng):
        path = tmp_path / "e.spce"
        semantic.write_embeddings(path, [(fake_id(0), rng.standard_normal(768).astype(np.float32))])
        ef = semantic.EmbeddingFile(path)
        with pytest.raises(MissingEmbeddingError):
            ef.lookup(fake_id(1))

    def test_header_layout(self, tmp_path, rng):
        path = tmp_path / "e.spce"
        vec = rng.standard_normal(768).astype(np.float32)
        semantic.write_embeddings(path, [(fake_id(5), vec)])
        raw = path.read_bytes()
        magic, version, count, dim = struct.unpack_from("<4sIQI", raw, 0)
        assert magic == b"SPCE"
        assert version == 1
        assert count == 1
        assert dim == 768
        assert raw[20:52] == fake_id(5)
        assert raw[52:] == vec.tobytes()
        assert len(raw) == 20 + 32 + 768 * 4

    def test_writer_rejects_bad_records(self, tmp_path, rng):
        vec = rng.standard_normal(768).astype(np.float32)
        with pytest.raises(FormatError):
            semantic.write_embeddings(tmp_path / "a", [(b"short", vec)])
        with pytest.raises(FormatError):
            semantic.write_embeddings(tmp_path / "b", [(fake_id(0), vec[:100])])
        bad = vec.copy()
        bad[3] = np.nan
        with pytest.raises(FormatError):
            semantic.write_embeddings(tmp_path / "c", [(fake_id(0), bad)])
        with pytest.raises(FormatError):
            semantic.write_embeddings(tmp_path / "d", [(fake_id(0), vec), (fake_id(0), vec)])

    def test_reader_rejects_corruption(self, tmp_path, rng):
        path = tmp_path / "e.spce"
        semantic.write_embeddings(path, [(fake_id(0), rng.standard_normal(768).astype(np.float32))])
        raw = bytearray(path.read_bytes())

        bad = tmp_path / "magic.spce"
        corrupt = raw.copy()
        corrupt[:4] = b"XXXX"
        bad.write_bytes(corrupt)
        with pytest.raises(FormatError):
            semantic.EmbeddingFile(bad)

        bad = tmp_path / "trunc.spce"
        bad.write_bytes(raw[:-10])
        with pytest.raises(FormatError):
            semantic.EmbeddingFile(bad)

        bad = tmp_path / "dim.spce"
        corrupt = raw.copy()
        struct.pack_into("<I", corrupt, 16, 384)
        bad.write_bytes(corrupt)
        with pytest.raises(FormatError):
            semantic.EmbeddingFile(bad)

        bad = tmp_path / "ver.spce"
        corrupt = raw.copy()
        struct.pack_into("<I", corrupt, 4, 9)
        bad.write_bytes(corrupt)
        with pytest.raises(FormatError):
            semantic.EmbeddingFile(bad)

        bad = tmp_path / "header.spce"
        bad.write_bytes(raw[:8])
        with pytest.raises(FormatError):
            semantic.EmbeddingFile(bad)


class TestProvider:
    def test_stub_only(self):
        p = semantic.SemanticProvider()
        np.testing.assert_array_equal(p.get(fake_id(0)), semantic.stub(fake_id(0)))

    def test_file_hit_bypasses_stub(self, tmp_path, rng):
        vec = rng.standard_normal(768).astype(np.float32)
        path = tmp_path / "e.spce"
        semantic.write_embeddings(path, [(fake_id(0), vec)])
        p = semantic.SemanticProvider(semantic.EmbeddingFile(path))
        np.testing.assert_array_equal(p.get(fake_id(0)), vec)

    def test_miss_raises_without_fallback(self, tmp_path, rng):
        path = tmp_path / "e.spce"
        semantic.write_embeddings(path, [(fake_id(0), rng.standard_normal(768).astype(np.float32))])
        p = semantic.SemanticProvider(semantic.EmbeddingFile(path))
        with pytest.raises(MissingEmbeddingError):
            p.get(fake_id(1))

    def test_miss_falls_back_when_enabled(self, tmp_path, rng):
        path = tmp_path / "e.spce"
        semantic.write_embeddings(path, [(fake_id(0), rng.standard_normal(768).astype(np.float32))])
        p = semantic.SemanticProvider(semantic.EmbeddingFile(path), fallback_to_stub=True)
        np.testing.assert_array_equal(p.get(fake_id(1)), semantic.stub(fake_id(1)))
