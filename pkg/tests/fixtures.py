"""Constructed benchmark-comparison fixture.

Reproduces the reported comparison arithmetic exactly: 147 refinery clusters
with 108 covered (73.5%), 1,222 terminal clusters with 292 covered (23.9%),
and 6 / 142 new detections, with per-type detection totals 114 / 336.

Geometry lives near the equator so kilometer offsets convert cleanly to
degrees; every distance carries at least a 1.5x margin against its threshold
(dedup 2 km, coverage 3 km), so float noise cannot flip a predicate.
"""

from dataclasses import dataclass

from ogdetect.benchmark import DetectedFacility, FacilityRecord
from ogdetect.geo import GeoPoint

KM = 1.0 / 111.19492664455873  # degrees per km (latitude; longitude at lat 0)


@dataclass(frozen=True)
class Table1Fixture:
    records: list
    detections: list
    training: list
    expected: dict


def build_table1_fixture() -> Table1Fixture:
    records = []
    detections = []
    training = []

    def record(i, lat, lon, ftype):
        records.append(
            FacilityRecord(
                source=("GOGI", "GHGRP", "HIFLD", "EIA")[i % 4],
                facility_type=ftype,
                location=GeoPoint(lat, lon),
                raw_id=f"rec-{len(records):05d}",
            )
        )

    def detection(lat, lon, ftype):
        detections.append(
            DetectedFacility(
                id=f"det-{len(detections):06d}",
                location=GeoPoint(lat, lon),
                facility_type=ftype,
            )
        )

    # --- oil refineries: 147 clusters on a 10 km line at the equator.
    for k in range(147):
        record(k, 0.0, k * 10.0 * KM, "oil_refinery")
    # 108 covered: a detection 1 km north of each of the first 108.
    for k in range(108):
        detection(1.0 * KM, k * 10.0 * KM, "oil_refinery")
    # 6 new refinery detections, ~55 km away from everything.
    for k in range(6):
        detection(0.5, k * 10.0 * KM, "oil_refinery")

    # --- petroleum terminals: 98 covered pairs at lat 1.0 (4 km apart, one
    # detection at the midpoint covers both), 96 singly covered at lat 1.1,
    # 930 uncovered from lat 1.3 northward in 11 km rows.
    for j in range(98):
        base = j * 20.0 * KM
        record(j, 1.0, base, "petroleum_terminal")
        record(j, 1.0, base + 4.0 * KM, "petroleum_terminal")
        detection(1.0, base + 2.0 * KM, "petroleum_terminal")
    for k in range(96):
        record(k, 1.1, k * 10.0 * KM, "petroleum_terminal")
        detection(1.1 + 1.0 * KM, k * 10.0 * KM, "petroleum_terminal")
    for i in range(930):
        record(i, 1.3 + 0.1 * (i // 100), (i % 100) * 10.0 * KM, "petroleum_terminal")
    # 142 new terminal detections, ~89 km north of the farthest cluster row.
    for k in range(142):
        detection(3.0, k * 10.0 * KM, "petroleum_terminal")

    # training locations: five on covered refinery clusters (already non-new)
    # and five far from everything.
    for k in range(5):
        training.append(GeoPoint(0.0, k * 10.0 * KM))
        training.append(GeoPoint(5.0, k * 10.0 * KM))

    expected = {
        "oil_refinery": {
            "cluster_total": 147,
            "covered": 108,
            "coverage_percent": "73.5",
            "total_detections": 114,
            "new_detections": 6,
        },
        "petroleum_terminal": {
            "cluster_total": 1222,
            "covered": 292,
            "coverage_percent": "23.9",
            "total_detections": 336,
            "new_detections": 142,
        },
    }
    return Table1Fixture(
        records=records, detections=detections, training=training, expected=expected
    )
