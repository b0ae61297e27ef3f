"""Comparison of verified detections against public facility datasets:
duplicate-record clustering, coverage matching, and new-detection counting.

Dedup is single-linkage (transitive closure) within each facility type:
records joined by a chain of <= radius hops share a cluster regardless of
input order. Coverage and new-detection tests use inclusive great-circle
distance thresholds.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geo import EARTH_RADIUS_KM, GeoPoint, ProjectedPoint, project, unproject

SOURCES = ("GOGI", "GHGRP", "HIFLD", "EIA", "other")
FACILITY_TYPES = ("oil_refinery", "petroleum_terminal")

DEDUP_RADIUS_KM = 2.0
COVERAGE_RADIUS_KM = 3.0


@dataclass(frozen=True)
class FacilityRecord:
    source: str
    facility_type: str
    location: GeoPoint
    raw_id: str

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ValueError(f"unknown source: {self.source!r}")
        if self.facility_type not in FACILITY_TYPES:
            raise ValueError(f"unknown facility_type: {self.facility_type!r}")


@dataclass(frozen=True)
class DetectedFacility:
    """A verified detection reduced to what matching needs."""

    id: str
    location: GeoPoint
    facility_type: str

    def __post_init__(self) -> None:
        if self.facility_type not in FACILITY_TYPES:
            raise ValueError(f"unknown facility_type: {self.facility_type!r}")


@dataclass(frozen=True)
class Cluster:
    representative: GeoPoint
    members: tuple[FacilityRecord, ...]
    facility_type: str


@dataclass(frozen=True)
class CombinedDataset:
    clusters: tuple[Cluster, ...]

    def by_type(self, facility_type: str) -> list[Cluster]:
        return [c for c in self.clusters if c.facility_type == facility_type]


@dataclass(frozen=True)
class TypeCoverage:
    total: int
    covered: int
    fraction: float
    empty: bool = False


@dataclass(frozen=True)
class CoverageReport:
    per_type: Mapping[str, TypeCoverage]


def _pairwise_within(points: Sequence[GeoPoint], radius_km: float) -> np.ndarray:
    """Boolean adjacency matrix: haversine(a, b) <= radius (vectorized)."""
    lat = np.radians(np.array([p.lat for p in points]))
    lon = np.radians(np.array([p.lon for p in points]))
    dlat = lat[:, None] - lat[None, :]
    dlon = lon[:, None] - lon[None, :]
    h = np.sin(dlat / 2.0) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2.0) ** 2
    dist = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))
    return dist <= radius_km


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _record_sort_key(r: FacilityRecord):
    return (r.location.lat, r.location.lon, r.source, r.raw_id)


def dedup(records: Sequence[FacilityRecord], radius_km: float = DEDUP_RADIUS_KM) -> CombinedDataset:
    """Cluster records within ``radius_km`` of each other, transitively.

    Clustering runs independently per facility type. The representative
    location of a cluster is the unprojected mean of its members' projected
    coordinates. The partition and the output ordering are invariant under
    permutation of the input.
    """
    clusters: list[Cluster] = []
    for ftype in FACILITY_TYPES:
        group = sorted((r for r in records if r.facility_type == ftype), key=_record_sort_key)
        if not group:
            continue
        adjacent = _pairwise_within([r.location for r in group], radius_km)
        uf = _UnionFind(len(group))
        for i, j in zip(*np.nonzero(np.triu(adjacent, k=1))):
            uf.union(int(i), int(j))
        by_root: dict[int, list[FacilityRecord]] = {}
        for i, rec in enumerate(group):
            by_root.setdefault(uf.find(i), []).append(rec)
        for members in by_root.values():
            pts = [project(m.location) for m in members]
            mean = ProjectedPoint(
                sum(p.x for p in pts) / len(pts), sum(p.y for p in pts) / len(pts)
            )
            clusters.append(
                Cluster(
                    representative=unproject(mean),
                    members=tuple(members),
                    facility_type=ftype,
                )
            )
    clusters.sort(key=lambda c: (c.facility_type, c.representative.lat, c.representative.lon))
    return CombinedDataset(clusters=tuple(clusters))


def _within_any(point: GeoPoint, others: Sequence[GeoPoint], radius_km: float) -> bool:
    if not others:
        return False
    lat = np.radians(np.array([p.lat for p in others]))
    lon = np.radians(np.array([p.lon for p in others]))
    p_lat = math.radians(point.lat)
    p_lon = math.radians(point.lon)
    h = (
        np.sin((lat - p_lat) / 2.0) ** 2
        + math.cos(p_lat) * np.cos(lat) * np.sin((lon - p_lon) / 2.0) ** 2
    )
    dist = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))
    return bool((dist <= radius_km).any())


def coverage(
    combined: CombinedDataset,
    detections: Sequence[DetectedFacility],
    radius_km: float = COVERAGE_RADIUS_KM,
) -> CoverageReport:
    """Per-type cluster coverage: a cluster is covered when any detection
    centroid lies within ``radius_km`` of its representative location."""
    det_points = [d.location for d in detections]
    per_type = {}
    for ftype in FACILITY_TYPES:
        clusters = combined.by_type(ftype)
        covered = sum(
            1 for c in clusters if _within_any(c.representative, det_points, radius_km)
        )
        total = len(clusters)
        per_type[ftype] = TypeCoverage(
            total=total,
            covered=covered,
            fraction=covered / total if total else 0.0,
            empty=total == 0,
        )
    return CoverageReport(per_type=per_type)


def new_detections(
    combined: CombinedDataset,
    detections: Sequence[DetectedFacility],
    training_locations: Sequence[GeoPoint] = (),
    radius_km: float = COVERAGE_RADIUS_KM,
) -> dict[str, list[str]]:
    """Detections with no benchmark cluster and no training location within
    ``radius_km`` (inclusive), grouped by the detection's facility type.

    The proximity test runs against clusters of every type: a detection next
    to any benchmark record already occurs in the public datasets.
    """
    cluster_points = [c.representative for c in combined.clusters]
    out: dict[str, list[str]] = {ftype: [] for ftype in FACILITY_TYPES}
    for det in detections:
        if _within_any(det.location, cluster_points, radius_km):
            continue
        if _within_any(det.location, list(training_locations), radius_km):
            continue
        out[det.facility_type].append(det.id)
    return out


# --------------------------------------------------------------------------
# Table-1-style report


@dataclass(frozen=True)
class Table1Row:
    total_detections: int
    covered: int
    cluster_total: int
    coverage_percent: str  # one-decimal string, e.g. "73.5"
    new_detections: int


@dataclass(frozen=True)
class Table1Report:
    rows: Mapping[str, Table1Row]

    def to_dict(self) -> dict:
        return {
            ftype: {
                "total_detections": row.total_detections,
                "coverage_percent": row.coverage_percent,
                "covered": row.covered,
                "cluster_total": row.cluster_total,
                "new_detections": row.new_detections,
            }
            for ftype, row in self.rows.items()
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["metric"] + list(FACILITY_TYPES))
        fields = [
            ("total_detections", lambda r: r.total_detections),
            ("coverage_percent", lambda r: r.coverage_percent),
            ("covered", lambda r: r.covered),
            ("cluster_total", lambda r: r.cluster_total),
            ("new_detections", lambda r: r.new_detections),
        ]
        for name, get in fields:
            writer.writerow([name] + [get(self.rows[t]) for t in FACILITY_TYPES])
        return buf.getvalue()


def coverage_percent_text(covered: int, total: int) -> str:
    """One-decimal percentage, "0.0" for an empty denominator."""
    if total == 0:
        return "0.0"
    return f"{100.0 * covered / total:.1f}"


def table1_report(
    detections: Sequence[DetectedFacility],
    cov: CoverageReport,
    new_by_type: Mapping[str, Sequence[str]],
) -> Table1Report:
    rows = {}
    for ftype in FACILITY_TYPES:
        tc = cov.per_type[ftype]
        rows[ftype] = Table1Row(
            total_detections=sum(1 for d in detections if d.facility_type == ftype),
            covered=tc.covered,
            cluster_total=tc.total,
            coverage_percent=coverage_percent_text(tc.covered, tc.total),
            new_detections=len(new_by_type.get(ftype, ())),
        )
    return Table1Report(rows=rows)


def parse_table1_csv(text: str) -> Table1Report:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header[0] != "metric" or tuple(header[1:]) != FACILITY_TYPES:
        raise ValueError(f"bad table header: {header}")
    cells: dict[str, list[str]] = {}
    for row in reader:
        if row:
            cells[row[0]] = row[1:]
    rows = {}
    for i, ftype in enumerate(FACILITY_TYPES):
        rows[ftype] = Table1Row(
            total_detections=int(cells["total_detections"][i]),
            covered=int(cells["covered"][i]),
            cluster_total=int(cells["cluster_total"][i]),
            coverage_percent=cells["coverage_percent"][i],
            new_detections=int(cells["new_detections"][i]),
        )
    return Table1Report(rows=rows)


# --------------------------------------------------------------------------
# Record and location file formats

_RECORDS_HEADER = ["source", "facility_type", "lat", "lon", "raw_id"]


def read_facility_records_csv(path: Path) -> list[FacilityRecord]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing records file: {path}")
    out = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _RECORDS_HEADER:
            raise ValueError(f"bad records header {reader.fieldnames} in {path}")
        for rec in reader:
            out.append(
                FacilityRecord(
                    source=rec["source"],
                    facility_type=rec["facility_type"],
                    location=GeoPoint(float(rec["lat"]), float(rec["lon"])),
                    raw_id=rec["raw_id"],
                )
            )
    return out


def write_facility_records_csv(path: Path, records: Sequence[FacilityRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_RECORDS_HEADER)
        for r in records:
            writer.writerow(
                [r.source, r.facility_type, repr(r.location.lat), repr(r.location.lon), r.raw_id]
            )


def read_facility_records_geojson(path: Path) -> list[FacilityRecord]:
    doc = json.loads(Path(path).read_text())
    if doc.get("type") != "FeatureCollection":
        raise ValueError("expected a GeoJSON FeatureCollection")
    out = []
    for feature in doc.get("features", []):
        props = feature["properties"]
        lon, lat = feature["geometry"]["coordinates"]
        out.append(
            FacilityRecord(
                source=props["source"],
                facility_type=props["facility_type"],
                location=GeoPoint(float(lat), float(lon)),
                raw_id=str(props["raw_id"]),
            )
        )
    return out


def read_detected_facilities_geojson(path: Path) -> list[DetectedFacility]:
    """Verified detections as GeoJSON Points.

    Accepts the store's confirmed-facility export: ``rolled_type`` wins when
    present, otherwise ``facility_type`` must already use the rolled-up
    vocabulary.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing detections file: {path}")
    doc = json.loads(path.read_text())
    if doc.get("type") != "FeatureCollection":
        raise ValueError("expected a GeoJSON FeatureCollection")
    out = []
    for feature in doc.get("features", []):
        props = feature["properties"]
        lon, lat = feature["geometry"]["coordinates"]
        ftype = props.get("rolled_type") or props["facility_type"]
        out.append(
            DetectedFacility(
                id=str(props["id"]),
                location=GeoPoint(float(lat), float(lon)),
                facility_type=ftype,
            )
        )
    return out


def read_training_locations_csv(path: Path) -> list[GeoPoint]:
    """Training-set facility locations: CSV with header ``lat,lon``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing training locations file: {path}")
    out = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["lat", "lon"]:
            raise ValueError(f"bad training header {reader.fieldnames} in {path}")
        for rec in reader:
            out.append(GeoPoint(float(rec["lat"]), float(rec["lon"])))
    return out


def write_training_locations_csv(path: Path, points: Iterable[GeoPoint]) -> None:
    lines = ["lat,lon"] + [f"{p.lat!r},{p.lon!r}" for p in points]
    Path(path).write_text("\n".join(lines) + "\n")
