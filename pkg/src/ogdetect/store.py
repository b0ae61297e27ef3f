"""Detection database and human-review state machine.

Reviews are an append-only newline-delimited JSON event log; live state is a
pure fold of that log over the ingested detections, so replaying the log from
empty always reproduces the current state. Detections themselves persist in
the pipeline's GeoJSON export and are ingested at startup.
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .pipeline import Detection

logger = logging.getLogger(__name__)

STATUSES = ("pending", "confirmed", "rejected")
ACTIONS = ("classify", "reject", "reopen")
FACILITY_SUBTYPES = ("oil_refinery", "crude_oil_terminal", "lng_terminal")

# Terminal subtypes roll up for benchmark reporting.
_ROLLUP = {
    "oil_refinery": "oil_refinery",
    "crude_oil_terminal": "petroleum_terminal",
    "lng_terminal": "petroleum_terminal",
}


class UnknownDetectionError(KeyError):
    pass


class IllegalTransitionError(ValueError):
    pass


def rolled_type(facility_subtype: str) -> str:
    """Map a review-time subtype to its benchmark reporting type."""
    try:
        return _ROLLUP[facility_subtype]
    except KeyError:
        raise ValueError(f"unknown facility type: {facility_subtype!r}") from None


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


@dataclass(frozen=True)
class ReviewEvent:
    detection_id: str
    action: str
    reviewer: str
    timestamp: str
    facility_type: str | None = None
    tank_count: int | None = None

    def __post_init__(self) -> None:
        if self.action not in ACTIONS:
            raise ValueError(f"unknown action: {self.action!r}")
        if self.facility_type is not None and self.facility_type not in FACILITY_SUBTYPES:
            raise ValueError(f"unknown facility type: {self.facility_type!r}")
        if self.tank_count is not None and (
            not isinstance(self.tank_count, int) or self.tank_count < 0
        ):
            raise ValueError(f"tank_count must be a nonnegative integer: {self.tank_count!r}")

    def to_line(self) -> str:
        doc = {
            "detection_id": self.detection_id,
            "action": self.action,
            "reviewer": self.reviewer,
            "timestamp": self.timestamp,
        }
        if self.facility_type is not None:
            doc["facility_type"] = self.facility_type
        if self.tank_count is not None:
            doc["tank_count"] = self.tank_count
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_line(line: str) -> "ReviewEvent":
        doc = json.loads(line)
        return ReviewEvent(
            detection_id=doc["detection_id"],
            action=doc["action"],
            reviewer=doc.get("reviewer", ""),
            timestamp=doc["timestamp"],
            facility_type=doc.get("facility_type"),
            tank_count=doc.get("tank_count"),
        )


@dataclass(frozen=True)
class ReviewedDetection:
    detection: Detection
    status: str = "pending"
    facility_type: str | None = None
    tank_count: int | None = None
    reviewer: str = ""
    reviewed_at: str | None = None

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"unknown status: {self.status!r}")
        if self.status == "confirmed" and self.facility_type is None:
            raise ValueError("confirmed detections require a facility_type")
        if self.status != "confirmed" and self.facility_type is not None:
            raise ValueError(f"{self.status} detections must not carry a facility_type")
        if self.status != "confirmed" and self.tank_count is not None:
            raise ValueError(f"{self.status} detections must not carry a tank_count")

    def to_dict(self) -> dict:
        d = self.detection
        return {
            "id": d.id,
            "lat": d.centroid.lat,
            "lon": d.centroid.lon,
            "max_probability": d.max_probability,
            "mean_probability": d.mean_probability,
            "tile_count": d.tile_count,
            "status": self.status,
            "facility_type": self.facility_type,
            "tank_count": self.tank_count,
            "reviewer": self.reviewer,
            "reviewed_at": self.reviewed_at,
        }


def _apply_event(row: ReviewedDetection, event: ReviewEvent) -> ReviewedDetection:
    """Single-step transition; raises IllegalTransitionError on bad moves."""
    if event.action == "classify":
        if row.status != "pending":
            raise IllegalTransitionError(
                f"cannot classify {event.detection_id} in status {row.status}; reopen first"
            )
        if event.facility_type is None:
            raise IllegalTransitionError("classify requires a facility_type")
        return replace(
            row,
            status="confirmed",
            facility_type=event.facility_type,
            tank_count=event.tank_count,
            reviewer=event.reviewer,
            reviewed_at=event.timestamp,
        )
    if event.action == "reject":
        if row.status != "pending":
            raise IllegalTransitionError(
                f"cannot reject {event.detection_id} in status {row.status}; reopen first"
            )
        if event.facility_type is not None:
            raise IllegalTransitionError("reject must not carry a facility_type")
        return replace(
            row,
            status="rejected",
            facility_type=None,
            tank_count=None,
            reviewer=event.reviewer,
            reviewed_at=event.timestamp,
        )
    # reopen
    if row.status == "pending":
        raise IllegalTransitionError(f"cannot reopen pending {event.detection_id}")
    return replace(
        row,
        status="pending",
        facility_type=None,
        tank_count=None,
        reviewer=event.reviewer,
        reviewed_at=event.timestamp,
    )


class ReviewStore:
    """Single-writer review store over an NDJSON event log.

    Appends are serialized and flushed to disk before a mutation is visible,
    so every acknowledged review survives a crash and replays identically.
    """

    def __init__(self, log_path: Path | None = None):
        self.log_path = Path(log_path) if log_path is not None else None
        self._rows: dict[str, ReviewedDetection] = {}
        self._last_event_ts: dict[str, str] = {}
        self._lock = threading.Lock()

    # -- ingestion ---------------------------------------------------------

    def ingest(self, detections: Iterable[Detection]) -> int:
        """Insert detections as pending; duplicate ids are skipped."""
        inserted = 0
        with self._lock:
            for det in detections:
                if not det.id:
                    raise ValueError("detection without an id")
                if not math.isfinite(det.max_probability):
                    raise ValueError(f"malformed detection {det.id}: bad probability")
                if det.id in self._rows:
                    logger.warning("duplicate detection id %s skipped on ingest", det.id)
                    continue
                self._rows[det.id] = ReviewedDetection(detection=det)
                inserted += 1
        return inserted

    def replay_log(self) -> int:
        """Fold any existing log into the current state; returns event count."""
        if self.log_path is None or not self.log_path.exists():
            return 0
        count = 0
        with self.log_path.open() as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                self._apply(ReviewEvent.from_line(line), persist=False)
                count += 1
        return count

    # -- review ------------------------------------------------------------

    def apply_review(self, event: ReviewEvent) -> ReviewedDetection:
        """Validate, durably append, then apply a review event."""
        return self._apply(event, persist=True)

    def _apply(self, event: ReviewEvent, persist: bool) -> ReviewedDetection:
        with self._lock:
            row = self._rows.get(event.detection_id)
            if row is None:
                raise UnknownDetectionError(event.detection_id)
            last_ts = self._last_event_ts.get(event.detection_id)
            if last_ts is not None and event.timestamp < last_ts:
                raise IllegalTransitionError(
                    f"event timestamp {event.timestamp} precedes last event "
                    f"{last_ts} for {event.detection_id}"
                )
            updated = _apply_event(row, event)
            if persist and self.log_path is not None:
                with self.log_path.open("a") as fh:
                    fh.write(event.to_line() + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            self._rows[event.detection_id] = updated
            self._last_event_ts[event.detection_id] = event.timestamp
            return updated

    # -- queries -----------------------------------------------------------

    def get(self, detection_id: str) -> ReviewedDetection:
        row = self._rows.get(detection_id)
        if row is None:
            raise UnknownDetectionError(detection_id)
        return row

    def all_rows(self) -> list[ReviewedDetection]:
        return sorted(self._rows.values(), key=lambda r: r.detection.id)

    def status_counts(self) -> dict[str, int]:
        counts = {status: 0 for status in STATUSES}
        for row in self._rows.values():
            counts[row.status] += 1
        return counts

    def verified_facilities(self) -> list[ReviewedDetection]:
        """Confirmed rows only, sorted by detection id."""
        return [r for r in self.all_rows() if r.status == "confirmed"]

    def verified_type_counts(self) -> dict[str, int]:
        """Confirmed counts by rolled-up benchmark type."""
        counts = {"oil_refinery": 0, "petroleum_terminal": 0}
        for row in self.verified_facilities():
            counts[rolled_type(row.facility_type)] += 1
        return counts

    def snapshot(self) -> bytes:
        """Canonical serialization of the full state, for replay checks."""
        rows = [r.to_dict() for r in self.all_rows()]
        return json.dumps(rows, sort_keys=True).encode()

    def confirmed_geojson(self) -> dict:
        """Confirmed facilities as GeoJSON Points with review attributes."""
        features = []
        for row in self.verified_facilities():
            d = row.detection
            features.append(
                {
                    "type": "Feature",
                    "geometry": {
                        "type": "Point",
                        "coordinates": [d.centroid.lon, d.centroid.lat],
                    },
                    "properties": {
                        "id": d.id,
                        "facility_type": row.facility_type,
                        "rolled_type": rolled_type(row.facility_type),
                        "tank_count": row.tank_count,
                        "reviewer": row.reviewer,
                        "reviewed_at": row.reviewed_at,
                    },
                }
            )
        return {"type": "FeatureCollection", "features": features}


def fold_events(detections: Sequence[Detection], events: Iterable[ReviewEvent]) -> ReviewStore:
    """Pure fold used as the replay oracle: fresh store, ingest, apply all."""
    store = ReviewStore(log_path=None)
    store.ingest(detections)
    for event in events:
        store._apply(event, persist=False)
    return store
