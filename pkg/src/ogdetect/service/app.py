"""HTTP API over the detection store: triage queue, imagery, CAM overlays,
review actions, and benchmark reports.

Every successful review response is preceded by a durable event-log append;
GET endpoints are side-effect free.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.staticfiles import StaticFiles
from PIL import Image

from .. import benchmark, exchange, pipeline, scoring, store
from ..geo import GeoPoint
from ..store import (
    IllegalTransitionError,
    ReviewEvent,
    ReviewStore,
    UnknownDetectionError,
    rolled_type,
    utc_now_iso,
)
from .schemas import (
    DetectionOut,
    DetectionPage,
    ReviewRequest,
    StatusCounts,
    Table1Out,
    Table1RowOut,
)

MAX_PAGE_SIZE = 500


@dataclass
class ApiConfig:
    """Paths wiring the service to its inputs; required ones must exist."""

    detections_path: Path
    event_log_path: Path
    tile_image_dir: Path
    feature_map_dir: Path | None = None
    weights_path: Path | None = None
    benchmark_records_path: Path | None = None
    training_locations_path: Path | None = None
    ui_dir: Path | None = None

    def validate(self) -> None:
        if not Path(self.detections_path).exists():
            raise FileNotFoundError(f"detections file not found: {self.detections_path}")
        if not Path(self.tile_image_dir).is_dir():
            raise FileNotFoundError(f"tile image directory not found: {self.tile_image_dir}")
        for optional in (
            self.feature_map_dir,
            self.weights_path,
            self.benchmark_records_path,
            self.training_locations_path,
            self.ui_dir,
        ):
            if optional is not None and not Path(optional).exists():
                raise FileNotFoundError(f"configured path not found: {optional}")


def _row_out(row: store.ReviewedDetection) -> DetectionOut:
    return DetectionOut(**row.to_dict())


def _parse_bbox(raw: str) -> tuple[float, float, float, float]:
    """bbox=min_lon,min_lat,max_lon,max_lat (GeoJSON order)."""
    parts = raw.split(",")
    if len(parts) != 4:
        raise ValueError("bbox must be min_lon,min_lat,max_lon,max_lat")
    try:
        min_lon, min_lat, max_lon, max_lat = (float(p) for p in parts)
    except ValueError as exc:
        raise ValueError(f"bbox values must be numeric: {raw!r}") from exc
    if not (min_lon < max_lon and min_lat < max_lat):
        raise ValueError("bbox must satisfy min < max on both axes")
    return min_lon, min_lat, max_lon, max_lat


def create_app(config: ApiConfig) -> FastAPI:
    config.validate()
    app = FastAPI(title="ogdetect review service", version="0.1.0")

    review_store = ReviewStore(log_path=config.event_log_path)
    review_store.ingest(pipeline.read_detections_geojson(config.detections_path))
    review_store.replay_log()
    app.state.store = review_store
    app.state.config = config

    tile_dir = Path(config.tile_image_dir)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/detections", response_model=DetectionPage)
    def list_detections(
        status: str | None = None,
        type: str | None = None,
        bbox: str | None = None,
        page: int = Query(default=1, ge=1),
        page_size: int = Query(default=50, ge=1, le=MAX_PAGE_SIZE),
    ) -> DetectionPage:
        if status is not None and status not in store.STATUSES:
            raise HTTPException(400, f"unknown status filter: {status!r}")
        if type is not None and type not in benchmark.FACILITY_TYPES:
            raise HTTPException(400, f"unknown type filter: {type!r}")
        box = None
        if bbox is not None:
            try:
                box = _parse_bbox(bbox)
            except ValueError as exc:
                raise HTTPException(400, str(exc))
        rows = review_store.all_rows()
        if status is not None:
            rows = [r for r in rows if r.status == status]
        if type is not None:
            rows = [
                r
                for r in rows
                if r.facility_type is not None and rolled_type(r.facility_type) == type
            ]
        if box is not None:
            min_lon, min_lat, max_lon, max_lat = box
            rows = [
                r
                for r in rows
                if min_lon <= r.detection.centroid.lon <= max_lon
                and min_lat <= r.detection.centroid.lat <= max_lat
            ]
        total = len(rows)
        start = (page - 1) * page_size
        items = [_row_out(r) for r in rows[start : start + page_size]]
        return DetectionPage(items=items, total=total, page=page, page_size=page_size)

    @app.get("/detections/{detection_id}", response_model=DetectionOut)
    def get_detection(detection_id: str) -> DetectionOut:
        try:
            return _row_out(review_store.get(detection_id))
        except UnknownDetectionError:
            raise HTTPException(404, f"unknown detection: {detection_id}")

    @app.get("/detections/{detection_id}/image")
    def get_detection_image(detection_id: str) -> Response:
        try:
            row = review_store.get(detection_id)
        except UnknownDetectionError:
            raise HTTPException(404, f"unknown detection: {detection_id}")
        path = tile_dir / exchange.tile_filename(row.detection.best_tile)
        if not path.exists():
            raise HTTPException(404, f"tile image not available for {detection_id}")
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.get("/detections/{detection_id}/cam")
    def get_detection_cam(detection_id: str) -> Response:
        try:
            row = review_store.get(detection_id)
        except UnknownDetectionError:
            raise HTTPException(404, f"unknown detection: {detection_id}")
        if config.feature_map_dir is None or config.weights_path is None:
            raise HTTPException(409, "feature maps not configured")
        fm_dir = Path(config.feature_map_dir)
        members = sorted(row.detection.member_tiles, key=lambda t: (t.row, t.col))
        ordered = [row.detection.best_tile] + [
            t for t in members if t != row.detection.best_tile
        ]
        fm_path = next(
            (
                p
                for t in ordered
                if (p := fm_dir / exchange.tile_filename(t, ".ogfm")).exists()
            ),
            None,
        )
        if fm_path is None:
            raise HTTPException(409, f"no feature maps available for {detection_id}")
        features = exchange.read_feature_map(fm_path)
        weights = exchange.read_weights(Path(config.weights_path))
        try:
            cam = scoring.compute_cam(features, weights)
        except scoring.DimensionError as exc:
            raise HTTPException(409, f"feature map mismatch: {exc}")
        raster = scoring.cam_to_png_array(cam)
        buf = io.BytesIO()
        Image.fromarray(raster, mode="L").save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.post("/detections/{detection_id}/review", response_model=DetectionOut)
    def post_review(detection_id: str, body: ReviewRequest) -> DetectionOut:
        event = ReviewEvent(
            detection_id=detection_id,
            action=body.action,
            facility_type=body.facility_type,
            tank_count=body.tank_count,
            reviewer=body.reviewer,
            timestamp=utc_now_iso(),
        )
        try:
            updated = review_store.apply_review(event)
        except UnknownDetectionError:
            raise HTTPException(404, f"unknown detection: {detection_id}")
        except IllegalTransitionError as exc:
            raise HTTPException(422, str(exc))
        return _row_out(updated)

    @app.get("/reports/status", response_model=StatusCounts)
    def report_status() -> StatusCounts:
        return StatusCounts(**review_store.status_counts())

    @app.get("/reports/table1", response_model=Table1Out)
    def report_table1() -> Table1Out:
        if config.benchmark_records_path is None:
            raise HTTPException(409, "benchmark datasets not loaded")
        records = benchmark.read_facility_records_csv(Path(config.benchmark_records_path))
        training: list[GeoPoint] = []
        if config.training_locations_path is not None:
            training = benchmark.read_training_locations_csv(
                Path(config.training_locations_path)
            )
        detected = [
            benchmark.DetectedFacility(
                id=row.detection.id,
                location=row.detection.centroid,
                facility_type=rolled_type(row.facility_type),
            )
            for row in review_store.verified_facilities()
        ]
        combined = benchmark.dedup(records)
        cov = benchmark.coverage(combined, detected)
        new = benchmark.new_detections(combined, detected, training)
        report = benchmark.table1_report(detected, cov, new)
        return Table1Out(
            oil_refinery=Table1RowOut(**report.to_dict()["oil_refinery"]),
            petroleum_terminal=Table1RowOut(**report.to_dict()["petroleum_terminal"]),
        )

    @app.get("/export/confirmed.geojson")
    def export_confirmed() -> dict:
        return review_store.confirmed_geojson()

    if config.ui_dir is not None:
        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app
