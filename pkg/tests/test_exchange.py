import numpy as np
import pytest

from ogdetect import exchange
from ogdetect.geo import TileIndex
from ogdetect.scoring import TileScore


class TestTileFilenames:
    def test_roundtrip(self):
        for tile in (TileIndex(0, 0), TileIndex(-3, 17), TileIndex(12, -9)):
            assert exchange.parse_tile_filename(exchange.tile_filename(tile)) == tile

    def test_rejects_garbage(self):
        with pytest.raises(exchange.ExchangeFormatError):
            exchange.parse_tile_filename("nope.png")


class TestPngRoundtrip:
    def test_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, size=(500, 500, 3), dtype=np.uint8)
        path = tmp_path / "0_0.png"
        exchange.save_tile_png(path, img)
        assert np.array_equal(exchange.load_tile_png(path), img)


class TestTileRequest:
    def test_manifest_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        tiles = [
            (TileIndex(5, 2), rng.integers(0, 256, (500, 500, 3), dtype=np.uint8)),
            (TileIndex(-1, 0), rng.integers(0, 256, (500, 500, 3), dtype=np.uint8)),
        ]
        exchange.write_tile_request(tmp_path, tiles)
        manifest = exchange.read_tile_manifest(tmp_path)
        # sorted by (row, col)
        assert [t for t, _ in manifest] == [TileIndex(-1, 0), TileIndex(5, 2)]
        for tile, name in manifest:
            assert (tmp_path / name).exists()
            assert exchange.parse_tile_filename(name) == tile

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            exchange.read_tile_manifest(tmp_path)


class TestScoresCsv:
    def test_full_precision_roundtrip(self, tmp_path):
        scores = [
            TileScore(TileIndex(0, 0), 0.1234567890123456789),
            TileScore(TileIndex(3, -2), 1.0 / 3.0),
            TileScore(TileIndex(-7, 5), 0.0),
        ]
        path = tmp_path / "scores.csv"
        exchange.write_scores_csv(path, scores)
        back = exchange.read_scores_csv(path)
        by_tile = {s.tile: s.probability for s in back}
        for s in scores:
            assert by_tile[s.tile] == s.probability  # bit-exact via repr

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("a,b,c\n1,2,0.5\n")
        with pytest.raises(exchange.ExchangeFormatError):
            exchange.read_scores_csv(path)


class TestFeatureMapFormat:
    def test_bit_exact_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        features = rng.normal(size=(7, 15, 15)).astype(np.float32)
        path = tmp_path / "0_0.ogfm"
        exchange.write_feature_map(path, features)
        back = exchange.read_feature_map(path)
        assert back.shape == (7, 15, 15)
        assert np.array_equal(back, features)

    def test_layout(self, tmp_path):
        features = np.arange(2 * 15 * 15, dtype=np.float32).reshape(2, 15, 15)
        path = tmp_path / "fm.ogfm"
        exchange.write_feature_map(path, features)
        data = path.read_bytes()
        assert data[:4] == b"OGFM"
        assert int.from_bytes(data[4:8], "little") == 2
        assert int.from_bytes(data[8:12], "little") == 15
        assert int.from_bytes(data[12:16], "little") == 15
        # channel-major then row-major: first float is [0,0,0], 226th is [1,0,0]
        vals = np.frombuffer(data, dtype="<f4", offset=16)
        assert vals[0] == 0.0
        assert vals[15 * 15] == float(15 * 15)

    def test_rejects_wrong_spatial_size(self, tmp_path):
        with pytest.raises(exchange.ExchangeFormatError):
            exchange.write_feature_map(tmp_path / "x.ogfm", np.ones((2, 14, 15), np.float32))

    def test_rejects_truncated(self, tmp_path):
        path = tmp_path / "x.ogfm"
        exchange.write_feature_map(path, np.ones((1, 15, 15), np.float32))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(exchange.ExchangeFormatError):
            exchange.read_feature_map(path)


class TestWeightsFormat:
    def test_bit_exact_roundtrip(self, tmp_path):
        w = np.array([0.25, -1.5, 3.75, 1e-7], dtype=np.float32)
        path = tmp_path / "model.ogfw"
        exchange.write_weights(path, w)
        assert np.array_equal(exchange.read_weights(path), w)

    def test_magic(self, tmp_path):
        path = tmp_path / "model.ogfw"
        exchange.write_weights(path, np.ones(3, np.float32))
        assert path.read_bytes()[:4] == b"OGFW"

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ogfw"
        path.write_bytes(b"NOPE" + b"\x00" * 8)
        with pytest.raises(exchange.ExchangeFormatError):
            exchange.read_weights(path)
