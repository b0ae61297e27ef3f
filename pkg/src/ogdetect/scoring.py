"""Tile scoring: the scorer abstraction, a deterministic heuristic scorer for
synthetic rasters, batch scoring, and class-activation-map computation.

A scorer is any callable mapping a 500x500x3 uint8 RGB array to a probability
in [0, 1]. Neural scorers run out of process and exchange results through the
file protocol in :mod:`ogdetect.exchange`; the built-in heuristic scorer keeps
the pipeline testable without one.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geo import TileIndex

TILE_PIXELS = 500
TILE_CHANNELS = 3
FEATURE_MAP_SIDE = 15

# ITU-R BT.601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])

# Heuristic scorer: logistic over the bright-pixel fraction. Facilities render
# as clusters of bright discs (>= 3% of pixels) on dark terrain, so the
# operating range is f=0 (terrain, p~0.018) vs f>=0.03 (facility, p>0.88).
BRIGHT_LUMINANCE = 200.0
LOGISTIC_GAIN = 200.0
BRIGHT_FRACTION_MIDPOINT = 0.02

Scorer = Callable[[np.ndarray], float]


class ScoringError(RuntimeError):
    """A scorer failed on a tile; the whole batch is aborted."""


class DimensionError(ValueError):
    """Array shape does not match the declared contract."""


@dataclass(frozen=True)
class TileScore:
    tile: TileIndex
    probability: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.probability) and 0.0 <= self.probability <= 1.0):
            raise ValueError(f"probability out of range: {self.probability}")


@dataclass(frozen=True)
class Cam:
    """Class activation map: raw 15x15 nonnegative grid plus its normalized
    500x500 bilinear upsample (max 1.0 unless identically zero)."""

    raw: np.ndarray
    upsampled: np.ndarray


def validate_tile_image(img: np.ndarray) -> np.ndarray:
    if not isinstance(img, np.ndarray):
        raise DimensionError(f"tile image must be an ndarray, got {type(img).__name__}")
    if img.shape != (TILE_PIXELS, TILE_PIXELS, TILE_CHANNELS):
        raise DimensionError(
            f"tile image must be {TILE_PIXELS}x{TILE_PIXELS}x{TILE_CHANNELS}, "
            f"got {img.shape}"
        )
    if img.dtype != np.uint8:
        raise DimensionError(f"tile image must be uint8, got {img.dtype}")
    return img


def bright_fraction(img: np.ndarray) -> float:
    """Fraction of pixels with BT.601 luminance strictly above 200."""
    luminance = img.astype(np.float64) @ _LUMA
    return float(np.count_nonzero(luminance > BRIGHT_LUMINANCE)) / luminance.size


def heuristic_score(img: np.ndarray) -> float:
    """Deterministic stand-in scorer: sigma(200 * (bright_fraction - 0.02))."""
    validate_tile_image(img)
    z = LOGISTIC_GAIN * (bright_fraction(img) - BRIGHT_FRACTION_MIDPOINT)
    # Guard exp overflow for very negative z; probability underflows to 0.
    if z < -700.0:
        return 0.0
    return 1.0 / (1.0 + math.exp(-z))


def _score_one(scorer: Scorer, tile: TileIndex, img: np.ndarray) -> TileScore:
    try:
        p = float(scorer(img))
    except Exception as exc:
        raise ScoringError(f"scorer failed on tile ({tile.col}, {tile.row}): {exc}") from exc
    if not (math.isfinite(p) and 0.0 <= p <= 1.0):
        raise ScoringError(
            f"scorer returned invalid probability {p!r} for tile ({tile.col}, {tile.row})"
        )
    return TileScore(tile, p)


def _score_chunk(args: tuple[Scorer, list[tuple[TileIndex, np.ndarray]]]) -> list[TileScore]:
    scorer, chunk = args
    return [_score_one(scorer, tile, img) for tile, img in chunk]


def score_batch(
    tiles: Sequence[tuple[TileIndex, np.ndarray]],
    scorer: Scorer,
    workers: int | None = None,
) -> list[TileScore]:
    """Score a batch of in-memory tiles; output sorted by (row, col).

    Results are independent of worker count and scheduling. A failure on any
    tile aborts the batch with a :class:`ScoringError` naming the tile.
    """
    if workers is None or workers <= 1 or len(tiles) <= 1:
        scores = [_score_one(scorer, tile, img) for tile, img in tiles]
    else:
        chunk_size = max(1, math.ceil(len(tiles) / (workers * 4)))
        chunks = [
            (scorer, list(tiles[i : i + chunk_size]))
            for i in range(0, len(tiles), chunk_size)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            scores = [s for part in pool.map(_score_chunk, chunks) for s in part]
    scores.sort(key=lambda s: (s.tile.row, s.tile.col))
    return scores


def bilinear_upsample(raw: np.ndarray, size: int = TILE_PIXELS) -> np.ndarray:
    """Bilinear resize with half-pixel-aligned sample centers.

    Output pixel (i, j) samples the source at ((i + 0.5) * in/out - 0.5,
    (j + 0.5) * in/out - 0.5), clamped to the source extent. Exact on
    constant inputs.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise DimensionError(f"expected a 2-D map, got shape {raw.shape}")

    def _axis(n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = (np.arange(size) + 0.5) * (n_in / size) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        i0 = np.floor(src).astype(np.intp)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, src - i0

    r0, r1, ty = _axis(raw.shape[0])
    c0, c1, tx = _axis(raw.shape[1])
    # lerp as a + t*(b - a): exact when a == b, so constants stay constants
    rows = raw[r0, :] + ty[:, None] * (raw[r1, :] - raw[r0, :])
    return rows[:, c0] + tx[None, :] * (rows[:, c1] - rows[:, c0])


def compute_cam(features: np.ndarray, weights: np.ndarray) -> Cam:
    """Weighted sum of feature maps clamped at zero, upsampled and max-normalized.

    ``features`` is C x 15 x 15, ``weights`` length C. The upsampled map is
    divided by its maximum when positive, otherwise left all zero.
    """
    features = np.asarray(features, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if features.ndim != 3 or features.shape[1:] != (FEATURE_MAP_SIDE, FEATURE_MAP_SIDE):
        raise DimensionError(
            f"feature maps must be C x {FEATURE_MAP_SIDE} x {FEATURE_MAP_SIDE}, "
            f"got {features.shape}"
        )
    if weights.ndim != 1 or weights.shape[0] != features.shape[0]:
        raise DimensionError(
            f"weights length {weights.shape} does not match channel count "
            f"{features.shape[0]}"
        )
    raw = np.maximum(0.0, np.tensordot(weights, features, axes=1))
    upsampled = bilinear_upsample(raw)
    peak = float(upsampled.max(initial=0.0))
    if peak > 0.0:
        upsampled = upsampled / peak
    else:
        upsampled = np.zeros_like(upsampled)
    return Cam(raw=raw, upsampled=upsampled)


def cam_to_png_array(cam: Cam) -> np.ndarray:
    """Quantize the normalized CAM to an 8-bit grayscale raster."""
    return np.round(cam.upsampled * 255.0).astype(np.uint8)
