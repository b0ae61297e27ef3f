"""File exchange protocol for external tile scorers.

Request: a directory of PNG tiles named ``{col}_{row}.png`` plus a manifest
``tiles.csv`` (header ``col,row,filename``). Response: ``scores.csv`` (header
``col,row,probability``, full-precision decimal text), optionally accompanied
by per-tile feature-map files ``{col}_{row}.ogfm`` and a classifier weights
file (``.ogfw``). Binary layouts are little-endian and bit-exact:

``.ogfm``: magic ``OGFM``, uint32 C, uint32 H, uint32 W (H = W = 15), then
C*H*W float32 values, channel-major then row-major.

``.ogfw``: magic ``OGFW``, uint32 C, then C float32 values.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .geo import TileIndex
from .scoring import FEATURE_MAP_SIDE, TileScore, validate_tile_image

TILES_MANIFEST = "tiles.csv"
SCORES_FILENAME = "scores.csv"

_OGFM_MAGIC = b"OGFM"
_OGFW_MAGIC = b"OGFW"


class ExchangeFormatError(ValueError):
    """Malformed protocol file."""


def tile_filename(tile: TileIndex, suffix: str = ".png") -> str:
    return f"{tile.col}_{tile.row}{suffix}"


def parse_tile_filename(name: str) -> TileIndex:
    stem = Path(name).stem
    try:
        col_s, row_s = stem.rsplit("_", 1)
        return TileIndex(int(col_s), int(row_s))
    except ValueError as exc:
        raise ExchangeFormatError(f"not a tile filename: {name!r}") from exc


def save_tile_png(path: Path, img: np.ndarray) -> None:
    validate_tile_image(img)
    Image.fromarray(img, mode="RGB").save(path, format="PNG")


def load_tile_png(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return validate_tile_image(arr)


def write_tile_request(
    directory: Path, tiles: Iterable[tuple[TileIndex, np.ndarray]]
) -> Path:
    """Write PNG tiles and the ``tiles.csv`` manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = []
    for tile, img in tiles:
        name = tile_filename(tile)
        save_tile_png(directory / name, img)
        rows.append((tile.col, tile.row, name))
    rows.sort(key=lambda r: (r[1], r[0]))
    manifest = directory / TILES_MANIFEST
    with manifest.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["col", "row", "filename"])
        writer.writerows(rows)
    return manifest


def read_tile_manifest(directory: Path) -> list[tuple[TileIndex, str]]:
    manifest = Path(directory) / TILES_MANIFEST
    if not manifest.exists():
        raise FileNotFoundError(f"missing manifest: {manifest}")
    out = []
    with manifest.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["col", "row", "filename"]:
            raise ExchangeFormatError(
                f"bad manifest header {reader.fieldnames} in {manifest}"
            )
        for rec in reader:
            out.append((TileIndex(int(rec["col"]), int(rec["row"])), rec["filename"]))
    return out


def write_scores_csv(path: Path, scores: Sequence[TileScore]) -> None:
    """Full-precision decimal text; ``repr`` round-trips float64 exactly."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["col", "row", "probability"])
        for s in sorted(scores, key=lambda s: (s.tile.row, s.tile.col)):
            writer.writerow([s.tile.col, s.tile.row, repr(s.probability)])


def read_scores_csv(path: Path) -> list[TileScore]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing scores file: {path}")
    out = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["col", "row", "probability"]:
            raise ExchangeFormatError(f"bad scores header {reader.fieldnames} in {path}")
        for rec in reader:
            tile = TileIndex(int(rec["col"]), int(rec["row"]))
            out.append(TileScore(tile, float(rec["probability"])))
    return out


def write_feature_map(path: Path, features: np.ndarray) -> None:
    features = np.asarray(features, dtype=np.float32)
    if features.ndim != 3 or features.shape[1:] != (FEATURE_MAP_SIDE, FEATURE_MAP_SIDE):
        raise ExchangeFormatError(
            f"feature maps must be C x {FEATURE_MAP_SIDE} x {FEATURE_MAP_SIDE}, "
            f"got {features.shape}"
        )
    c, h, w = features.shape
    with Path(path).open("wb") as fh:
        fh.write(_OGFM_MAGIC)
        fh.write(struct.pack("<III", c, h, w))
        fh.write(np.ascontiguousarray(features).astype("<f4").tobytes())


def read_feature_map(path: Path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != _OGFM_MAGIC:
        raise ExchangeFormatError(f"bad magic in {path}")
    if len(data) < 16:
        raise ExchangeFormatError(f"truncated header in {path}")
    c, h, w = struct.unpack("<III", data[4:16])
    if (h, w) != (FEATURE_MAP_SIDE, FEATURE_MAP_SIDE):
        raise ExchangeFormatError(f"feature maps must be 15x15, got {h}x{w} in {path}")
    expected = 16 + 4 * c * h * w
    if len(data) != expected:
        raise ExchangeFormatError(
            f"size mismatch in {path}: expected {expected} bytes, got {len(data)}"
        )
    values = np.frombuffer(data, dtype="<f4", offset=16)
    return values.reshape(c, h, w).astype(np.float32)


def write_weights(path: Path, weights: np.ndarray) -> None:
    weights = np.asarray(weights, dtype=np.float32)
    if weights.ndim != 1:
        raise ExchangeFormatError(f"weights must be a vector, got shape {weights.shape}")
    with Path(path).open("wb") as fh:
        fh.write(_OGFW_MAGIC)
        fh.write(struct.pack("<I", weights.shape[0]))
        fh.write(weights.astype("<f4").tobytes())


def read_weights(path: Path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != _OGFW_MAGIC:
        raise ExchangeFormatError(f"bad magic in {path}")
    if len(data) < 8:
        raise ExchangeFormatError(f"truncated header in {path}")
    (c,) = struct.unpack("<I", data[4:8])
    if len(data) != 8 + 4 * c:
        raise ExchangeFormatError(f"size mismatch in {path}")
    return np.frombuffer(data, dtype="<f4", offset=8).astype(np.float32)
