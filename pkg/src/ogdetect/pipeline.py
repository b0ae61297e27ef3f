"""Deployment orchestration: enumerate tiles over a region, score them,
threshold, merge positive tiles into located detections, and filter
exclusion zones.

Detections are the connected components of the positive tile set (4-adjacency
by default, 8 available behind a flag); each component is reduced to the
unprojected mean of its member tiles' projected centers.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import exchange
from .geo import (
    BoundingRegion,
    GeoPoint,
    ProjectedPoint,
    TileIndex,
    enumerate_tiles,
    tile_center_projected,
    unproject,
)
from .scoring import Scorer, TileScore, _score_one

ADJACENCY_4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
ADJACENCY_8 = ADJACENCY_4 + ((1, 1), (1, -1), (-1, 1), (-1, -1))


class MissingTilesError(RuntimeError):
    """The image source does not cover the requested region."""

    def __init__(self, missing: Sequence[TileIndex]):
        self.missing = list(missing)
        preview = ", ".join(f"({t.col},{t.row})" for t in self.missing[:10])
        more = "" if len(self.missing) <= 10 else f" (+{len(self.missing) - 10} more)"
        super().__init__(f"image source missing {len(self.missing)} tiles: {preview}{more}")


@dataclass(frozen=True)
class OperatingPoint:
    threshold: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.threshold) and 0.0 <= self.threshold <= 1.0):
            raise ValueError(f"threshold out of range: {self.threshold}")


@dataclass(frozen=True)
class ExclusionZone:
    region: BoundingRegion
    reason: str = ""


@dataclass(frozen=True)
class Detection:
    """A merged group of positive tiles reduced to a centroid location."""

    id: str
    member_tiles: frozenset[TileIndex]
    centroid: GeoPoint
    max_probability: float
    mean_probability: float
    best_tile: TileIndex

    @property
    def tile_count(self) -> int:
        return len(self.member_tiles)


def apply_threshold(scores: Iterable[TileScore], op: OperatingPoint) -> set[TileIndex]:
    """Tiles whose probability is at or above the threshold (inclusive)."""
    return {s.tile for s in scores if s.probability >= op.threshold}


def _components(
    positive: set[TileIndex], offsets: Sequence[tuple[int, int]]
) -> list[list[TileIndex]]:
    """Connected components via iterative flood fill; deterministic order."""
    # flood fill on (col, row) tuples: cheaper hashing than dataclass instances
    remaining = {(t.col, t.row) for t in positive}
    components = []
    for start in sorted(remaining, key=lambda cr: (cr[1], cr[0])):
        if start not in remaining:
            continue
        remaining.discard(start)
        stack = [start]
        members = []
        while stack:
            col, row = stack.pop()
            members.append((col, row))
            for dc, dr in offsets:
                n = (col + dc, row + dr)
                if n in remaining:
                    remaining.discard(n)
                    stack.append(n)
        members.sort(key=lambda cr: (cr[1], cr[0]))
        components.append([TileIndex(col, row) for col, row in members])
    return components


def merge_positive_tiles(
    positive: set[TileIndex],
    scores: Mapping[TileIndex, float],
    adjacency: int = 4,
) -> list[Detection]:
    """Merge positive tiles into detections, one per connected component.

    The centroid is the unprojected arithmetic mean of member tiles' projected
    centers. Output is sorted by (min row, min col) of the members and ids are
    assigned sequentially in that order.
    """
    if adjacency == 4:
        offsets = ADJACENCY_4
    elif adjacency == 8:
        offsets = ADJACENCY_8
    else:
        raise ValueError(f"adjacency must be 4 or 8, got {adjacency}")
    missing = [t for t in positive if t not in scores]
    if missing:
        raise KeyError(f"no score for positive tiles: {sorted(missing, key=lambda t: (t.row, t.col))[:5]}")

    components = _components(positive, offsets)
    # (min row, min col) can tie across components; the smallest member breaks it
    components.sort(
        key=lambda ms: (
            min(t.row for t in ms),
            min(t.col for t in ms),
            min((t.row, t.col) for t in ms),
        )
    )

    detections = []
    for i, members in enumerate(components, start=1):
        xs = [tile_center_projected(t) for t in members]
        mean_x = sum(p.x for p in xs) / len(xs)
        mean_y = sum(p.y for p in xs) / len(xs)
        probs = [scores[t] for t in members]
        best = max(members, key=lambda t: (scores[t], -t.row, -t.col))
        detections.append(
            Detection(
                id=f"det-{i:06d}",
                member_tiles=frozenset(members),
                centroid=unproject(ProjectedPoint(mean_x, mean_y)),
                max_probability=max(probs),
                mean_probability=sum(probs) / len(probs),
                best_tile=best,
            )
        )
    return detections


def filter_exclusions(
    detections: Sequence[Detection], zones: Sequence[ExclusionZone]
) -> tuple[list[Detection], list[int]]:
    """Drop detections whose centroid falls inside any zone.

    Returns the surviving detections (order preserved) and the removed count
    per zone. A centroid inside several zones counts against each of them.
    """
    removed = [0] * len(zones)
    kept = []
    for det in detections:
        hit = False
        for i, zone in enumerate(zones):
            if zone.region.contains(det.centroid):
                removed[i] += 1
                hit = True
        if not hit:
            kept.append(det)
    return kept, removed


# --------------------------------------------------------------------------
# Image sources


class DirectoryImageSource:
    """Tiles stored as ``{col}_{row}.png`` files in a directory."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)

    def has(self, tile: TileIndex) -> bool:
        return (self.directory / exchange.tile_filename(tile)).exists()

    def load(self, tile: TileIndex) -> np.ndarray:
        path = self.directory / exchange.tile_filename(tile)
        if not path.exists():
            raise MissingTilesError([tile])
        return exchange.load_tile_png(path)


@dataclass
class DeploymentResult:
    detections: list[Detection]
    manifest: dict


def _score_tile_chunk(args) -> list[TileScore]:
    source, scorer, chunk = args
    return [_score_one(scorer, tile, source.load(tile)) for tile in chunk]


def score_tiles(
    source,
    tiles: Sequence[TileIndex],
    scorer: Scorer,
    workers: int | None = None,
) -> list[TileScore]:
    """Load and score tiles from an image source, sorted by (row, col).

    Parallelizes across processes when ``workers`` > 1; results are identical
    for any worker count. Both the source and the scorer must be picklable.
    """
    missing = [t for t in tiles if not source.has(t)]
    if missing:
        raise MissingTilesError(sorted(missing, key=lambda t: (t.row, t.col)))
    if workers is None or workers <= 1 or len(tiles) <= 1:
        scores = [_score_one(scorer, tile, source.load(tile)) for tile in tiles]
    else:
        chunk_size = max(1, math.ceil(len(tiles) / (workers * 8)))
        chunks = [
            (source, scorer, list(tiles[i : i + chunk_size]))
            for i in range(0, len(tiles), chunk_size)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            scores = [s for part in pool.map(_score_tile_chunk, chunks) for s in part]
    scores.sort(key=lambda s: (s.tile.row, s.tile.col))
    return scores


def run_deployment(
    region: BoundingRegion,
    source,
    scorer: Scorer,
    op: OperatingPoint,
    zones: Sequence[ExclusionZone] = (),
    adjacency: int = 4,
    workers: int | None = None,
    precomputed: Sequence[TileScore] | None = None,
) -> DeploymentResult:
    """Full deployment: enumerate -> score -> threshold -> merge -> filter.

    Deterministic given inputs; the manifest records counts and configuration
    (wall time is informational and excluded from determinism guarantees).
    ``precomputed`` substitutes externally produced scores for the scoring
    stage; they must cover every tile of the region.
    """
    start = time.perf_counter()
    tiles = enumerate_tiles(region)
    if precomputed is not None:
        by_tile = {s.tile: s for s in precomputed}
        missing = [t for t in tiles if t not in by_tile]
        if missing:
            raise MissingTilesError(missing)
        scores = [by_tile[t] for t in tiles]
        scores.sort(key=lambda s: (s.tile.row, s.tile.col))
    else:
        scores = score_tiles(source, tiles, scorer, workers=workers)
    positive = apply_threshold(scores, op)
    lookup = {s.tile: s.probability for s in scores}
    detections = merge_positive_tiles(positive, lookup, adjacency=adjacency)
    kept, removed = filter_exclusions(detections, zones)
    manifest = {
        "region": {
            "min_lat": region.min_lat,
            "min_lon": region.min_lon,
            "max_lat": region.max_lat,
            "max_lon": region.max_lon,
        },
        "tile_count": len(tiles),
        "positive_count": len(positive),
        "detection_count": len(kept),
        "threshold": op.threshold,
        "adjacency": adjacency,
        "exclusions": [
            {
                "reason": z.reason,
                "removed": removed[i],
                "region": {
                    "min_lat": z.region.min_lat,
                    "min_lon": z.region.min_lon,
                    "max_lat": z.region.max_lat,
                    "max_lon": z.region.max_lon,
                },
            }
            for i, z in enumerate(zones)
        ],
        "wall_time_s": round(time.perf_counter() - start, 3),
    }
    return DeploymentResult(detections=kept, manifest=manifest)


# --------------------------------------------------------------------------
# Export formats


def detection_to_feature(det: Detection) -> dict:
    return {
        "type": "Feature",
        "geometry": {
            "type": "Point",
            "coordinates": [det.centroid.lon, det.centroid.lat],
        },
        "properties": {
            "id": det.id,
            "max_probability": det.max_probability,
            "mean_probability": det.mean_probability,
            "tile_count": det.tile_count,
            "best_tile": [det.best_tile.col, det.best_tile.row],
            "member_tiles": sorted(
                ([t.col, t.row] for t in det.member_tiles),
                key=lambda cr: (cr[1], cr[0]),
            ),
        },
    }


def detections_to_geojson(detections: Sequence[Detection]) -> dict:
    return {
        "type": "FeatureCollection",
        "features": [detection_to_feature(d) for d in detections],
    }


def detection_from_feature(feature: dict) -> Detection:
    props = feature["properties"]
    lon, lat = feature["geometry"]["coordinates"]
    members = frozenset(TileIndex(int(c), int(r)) for c, r in props["member_tiles"])
    bc, br = props["best_tile"]
    return Detection(
        id=str(props["id"]),
        member_tiles=members,
        centroid=GeoPoint(lat, lon),
        max_probability=float(props["max_probability"]),
        mean_probability=float(props["mean_probability"]),
        best_tile=TileIndex(int(bc), int(br)),
    )


def detections_from_geojson(doc: dict) -> list[Detection]:
    if doc.get("type") != "FeatureCollection":
        raise ValueError("expected a GeoJSON FeatureCollection")
    return [detection_from_feature(f) for f in doc.get("features", [])]


def write_detections_geojson(path: Path, detections: Sequence[Detection]) -> None:
    Path(path).write_text(
        json.dumps(detections_to_geojson(detections), sort_keys=True, indent=2) + "\n"
    )


def read_detections_geojson(path: Path) -> list[Detection]:
    return detections_from_geojson(json.loads(Path(path).read_text()))


def write_detections_csv(path: Path, detections: Sequence[Detection]) -> None:
    lines = ["id,lat,lon,max_probability,mean_probability,tile_count"]
    for d in detections:
        lines.append(
            f"{d.id},{d.centroid.lat!r},{d.centroid.lon!r},"
            f"{d.max_probability!r},{d.mean_probability!r},{d.tile_count}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_manifest(path: Path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
