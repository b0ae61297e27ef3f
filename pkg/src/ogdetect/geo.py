"""Geodesy, spherical Web Mercator projection, and the deterministic tile grid.

All pipeline geometry lives on a single global grid of 1250 m square tiles in
projected meters (500 px at 2.5 m/px). Tile footprints are half-open so every
projected point belongs to exactly one tile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

# Mercator sphere radius (meters) and haversine mean earth radius (km).
# Fixed constants so grid indices and distances are bit-stable.
EARTH_RADIUS_M = 6_378_137.0
EARTH_RADIUS_KM = 6371.0

# 500 px * 2.5 m/px
TILE_SIDE_M = 1250.0

# Web Mercator validity band; beyond this y diverges.
MERCATOR_MAX_LAT = 85.06


class ProjectionDomainError(ValueError):
    """Latitude outside the Web Mercator validity band."""


@dataclass(frozen=True, order=True)
class GeoPoint:
    """Geodetic coordinate in degrees (WGS84 lat/lon treated spherically)."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinate: ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True, order=True)
class ProjectedPoint:
    """Point in spherical Web Mercator meters (x east, y north)."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite projected point: ({self.x}, {self.y})")


@dataclass(frozen=True, order=True)
class TileIndex:
    """Integer grid address; tile (col, row) covers the half-open square
    x in [col*1250, (col+1)*1250), y in [row*1250, (row+1)*1250)."""

    col: int
    row: int


@dataclass(frozen=True)
class BoundingRegion:
    """Axis-aligned lat/lon box, closed on all edges."""

    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    def __post_init__(self) -> None:
        GeoPoint(self.min_lat, self.min_lon)
        GeoPoint(self.max_lat, self.max_lon)
        if not (self.min_lat < self.max_lat and self.min_lon < self.max_lon):
            raise ValueError(
                f"degenerate region: lat [{self.min_lat}, {self.max_lat}], "
                f"lon [{self.min_lon}, {self.max_lon}]"
            )

    def contains(self, p: GeoPoint) -> bool:
        return (
            self.min_lat <= p.lat <= self.max_lat
            and self.min_lon <= p.lon <= self.max_lon
        )


def project(p: GeoPoint) -> ProjectedPoint:
    """Spherical Web Mercator forward projection.

    Raises ProjectionDomainError when |lat| >= 85.06 degrees.
    """
    if abs(p.lat) >= MERCATOR_MAX_LAT:
        raise ProjectionDomainError(
            f"latitude {p.lat} outside Mercator band (|lat| < {MERCATOR_MAX_LAT})"
        )
    x = EARTH_RADIUS_M * math.radians(p.lon)
    # asinh(tan(phi)) == ln(tan(pi/4 + phi/2)); exact at the equator
    y = EARTH_RADIUS_M * math.asinh(math.tan(math.radians(p.lat)))
    return ProjectedPoint(x, y)


def unproject(q: ProjectedPoint) -> GeoPoint:
    """Inverse of :func:`project`; clamps float overshoot at the lon bounds."""
    lon = math.degrees(q.x / EARTH_RADIUS_M)
    lat = math.degrees(2.0 * math.atan(math.exp(q.y / EARTH_RADIUS_M)) - math.pi / 2.0)
    return GeoPoint(min(90.0, max(-90.0, lat)), min(180.0, max(-180.0, lon)))


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in kilometers on a sphere of radius 6371 km."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def tile_of(p: GeoPoint) -> TileIndex:
    """Tile containing a point; boundaries belong to the tile to the north-east."""
    q = project(p)
    return TileIndex(math.floor(q.x / TILE_SIDE_M), math.floor(q.y / TILE_SIDE_M))


def tile_center_projected(t: TileIndex) -> ProjectedPoint:
    return ProjectedPoint((t.col + 0.5) * TILE_SIDE_M, (t.row + 0.5) * TILE_SIDE_M)


def tile_centroid(t: TileIndex) -> GeoPoint:
    """Geodetic center of a tile footprint."""
    return unproject(tile_center_projected(t))


def enumerate_tiles(region: BoundingRegion) -> list[TileIndex]:
    """All tiles whose half-open footprint intersects the closed projected region.

    Sorted by (row, col) ascending, duplicate-free. A region edge lying exactly
    on a grid line pulls in the tile that owns that boundary.
    """
    return list(iter_tiles(region))


def iter_tiles(region: BoundingRegion) -> Iterator[TileIndex]:
    """Streaming variant of :func:`enumerate_tiles` in (row, col) order."""
    lo = project(GeoPoint(region.min_lat, region.min_lon))
    hi = project(GeoPoint(region.max_lat, region.max_lon))
    col_min = math.floor(lo.x / TILE_SIDE_M)
    col_max = math.floor(hi.x / TILE_SIDE_M)
    row_min = math.floor(lo.y / TILE_SIDE_M)
    row_max = math.floor(hi.y / TILE_SIDE_M)
    for row in range(row_min, row_max + 1):
        for col in range(col_min, col_max + 1):
            yield TileIndex(col, row)


def count_tiles(region: BoundingRegion) -> int:
    """Tile count of :func:`enumerate_tiles` without materializing the list."""
    lo = project(GeoPoint(region.min_lat, region.min_lon))
    hi = project(GeoPoint(region.max_lat, region.max_lon))
    cols = math.floor(hi.x / TILE_SIDE_M) - math.floor(lo.x / TILE_SIDE_M) + 1
    rows = math.floor(hi.y / TILE_SIDE_M) - math.floor(lo.y / TILE_SIDE_M) + 1
    return cols * rows
