import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ogdetect.geo import (
    EARTH_RADIUS_KM,
    EARTH_RADIUS_M,
    TILE_SIDE_M,
    BoundingRegion,
    GeoPoint,
    ProjectedPoint,
    ProjectionDomainError,
    TileIndex,
    count_tiles,
    enumerate_tiles,
    haversine_km,
    project,
    tile_centroid,
    tile_of,
    unproject,
)

in_band_lat = st.floats(min_value=-84.9, max_value=84.9, allow_nan=False)
any_lon = st.floats(min_value=-180.0, max_value=180.0, allow_nan=False)


class TestGeoPoint:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            GeoPoint(float("nan"), 0.0)
        with pytest.raises(ValueError):
            GeoPoint(0.0, float("nan"))

    @pytest.mark.parametrize("lat,lon", [(91, 0), (-91, 0), (0, 181), (0, -181)])
    def test_rejects_out_of_bounds(self, lat, lon):
        with pytest.raises(ValueError):
            GeoPoint(lat, lon)


class TestProjection:
    def test_origin_is_fixed_point(self):
        q = project(GeoPoint(0.0, 0.0))
        assert q == ProjectedPoint(0.0, 0.0)

    def test_antimeridian_x(self):
        q = project(GeoPoint(0.0, 180.0))
        assert q.x == pytest.approx(EARTH_RADIUS_M * math.pi, abs=1e-6)
        assert q.y == 0.0

    def test_unproject_origin(self):
        assert unproject(ProjectedPoint(0.0, 0.0)) == GeoPoint(0.0, 0.0)

    def test_unproject_antimeridian(self):
        p = unproject(ProjectedPoint(EARTH_RADIUS_M * math.pi, 0.0))
        assert p.lat == pytest.approx(0.0, abs=1e-12)
        assert p.lon == pytest.approx(180.0, abs=1e-9)

    def test_out_of_band_rejected(self):
        with pytest.raises(ProjectionDomainError):
            project(GeoPoint(85.07, 0.0))
        with pytest.raises(ProjectionDomainError):
            project(GeoPoint(-86.0, 0.0))

    @given(lat=in_band_lat, lon=any_lon)
    @settings(max_examples=300)
    def test_roundtrip(self, lat, lon):
        p = GeoPoint(lat, lon)
        back = unproject(project(p))
        assert back.lat == pytest.approx(lat, abs=1e-9)
        assert back.lon == pytest.approx(lon, abs=1e-9)


class TestHaversine:
    def test_identity_is_zero(self):
        p = GeoPoint(45.0, -93.0)
        assert haversine_km(p, p) == 0.0

    def test_one_degree_along_equator(self):
        d = haversine_km(GeoPoint(0.0, 0.0), GeoPoint(0.0, 1.0))
        assert d == pytest.approx(EARTH_RADIUS_KM * math.pi / 180.0, abs=1e-9)
        assert d == pytest.approx(111.195, abs=0.001)

    @given(
        lat1=in_band_lat, lon1=any_lon,
        lat2=in_band_lat, lon2=any_lon,
        lat3=in_band_lat, lon3=any_lon,
    )
    @settings(max_examples=200)
    def test_symmetric_and_triangle(self, lat1, lon1, lat2, lon2, lat3, lon3):
        a, b, c = GeoPoint(lat1, lon1), GeoPoint(lat2, lon2), GeoPoint(lat3, lon3)
        assert haversine_km(a, b) == pytest.approx(haversine_km(b, a), abs=1e-12)
        assert haversine_km(a, c) <= haversine_km(a, b) + haversine_km(b, c) + 1e-9


class TestTileGrid:
    def test_origin_tile(self):
        assert tile_of(GeoPoint(0.0, 0.0)) == TileIndex(0, 0)

    def test_half_open_boundary(self):
        # a point projecting exactly onto a grid line belongs to the next tile
        p = unproject(ProjectedPoint(TILE_SIDE_M, 0.0))
        q = project(p)
        assert q.x == TILE_SIDE_M
        assert tile_of(p) == TileIndex(1, 0)

    @given(lat=in_band_lat, lon=any_lon)
    @settings(max_examples=300)
    def test_floor_oracle(self, lat, lon):
        p = GeoPoint(lat, lon)
        q = project(p)
        expected = TileIndex(math.floor(q.x / TILE_SIDE_M), math.floor(q.y / TILE_SIDE_M))
        assert tile_of(p) == expected

    def test_centroid_definition(self):
        assert tile_centroid(TileIndex(0, 0)) == unproject(ProjectedPoint(625.0, 625.0))
        assert tile_centroid(TileIndex(-1, -1)) == unproject(ProjectedPoint(-625.0, -625.0))

    @given(lat=in_band_lat, lon=any_lon)
    @settings(max_examples=200)
    def test_centroid_within_tile_diagonal(self, lat, lon):
        p = GeoPoint(lat, lon)
        center = tile_centroid(tile_of(p))
        # projected diagonal is 1250*sqrt(2); ground distance only shrinks
        assert haversine_km(p, center) * 1000.0 <= TILE_SIDE_M * math.sqrt(2.0) + 1e-6


def _brute_force_tiles(region: BoundingRegion) -> list[TileIndex]:
    lo = project(GeoPoint(region.min_lat, region.min_lon))
    hi = project(GeoPoint(region.max_lat, region.max_lon))
    pad = 3
    out = []
    for row in range(math.floor(lo.y / TILE_SIDE_M) - pad, math.floor(hi.y / TILE_SIDE_M) + pad + 1):
        for col in range(math.floor(lo.x / TILE_SIDE_M) - pad, math.floor(hi.x / TILE_SIDE_M) + pad + 1):
            x0, x1 = col * TILE_SIDE_M, (col + 1) * TILE_SIDE_M
            y0, y1 = row * TILE_SIDE_M, (row + 1) * TILE_SIDE_M
            # half-open footprint vs closed region box
            if x0 <= hi.x and x1 > lo.x and y0 <= hi.y and y1 > lo.y:
                out.append(TileIndex(col, row))
    return out


class TestEnumerateTiles:
    def test_region_inside_one_tile(self):
        a = unproject(ProjectedPoint(100.0, 100.0))
        b = unproject(ProjectedPoint(1100.0, 1100.0))
        region = BoundingRegion(min_lat=a.lat, min_lon=a.lon, max_lat=b.lat, max_lon=b.lon)
        assert enumerate_tiles(region) == [TileIndex(0, 0)]

    def test_matches_brute_force_oracle(self):
        cases = [
            (10.0, 10.0, 2400.0, 2400.0),
            (0.0, 0.0, 2500.0, 2500.0),       # edges exactly on grid lines
            (-3200.0, -100.0, 1.0, 5100.0),
            (625.0, 625.0, 626.0, 626.0),
        ]
        for x0, y0, x1, y1 in cases:
            a, b = unproject(ProjectedPoint(x0, y0)), unproject(ProjectedPoint(x1, y1))
            region = BoundingRegion(min_lat=a.lat, min_lon=a.lon, max_lat=b.lat, max_lon=b.lon)
            got = enumerate_tiles(region)
            assert got == sorted(_brute_force_tiles(region), key=lambda t: (t.row, t.col))
            assert len(got) == len(set(got))
            assert got == sorted(got, key=lambda t: (t.row, t.col))
            assert count_tiles(region) == len(got)

    def test_count_monotone_in_region_growth(self):
        base = 100.0
        prev = 0
        for grow in (300.0, 1500.0, 2600.0, 5200.0, 9000.0):
            a = unproject(ProjectedPoint(-grow, -grow))
            b = unproject(ProjectedPoint(base + grow, base + grow))
            region = BoundingRegion(min_lat=a.lat, min_lon=a.lon, max_lat=b.lat, max_lon=b.lon)
            n = len(enumerate_tiles(region))
            assert n >= prev
            prev = n

    def test_degenerate_region_rejected(self):
        with pytest.raises(ValueError):
            BoundingRegion(min_lat=10.0, min_lon=0.0, max_lat=10.0, max_lon=1.0)
