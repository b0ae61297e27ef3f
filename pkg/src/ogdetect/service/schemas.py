"""Pydantic request/response models for the review API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class DetectionOut(BaseModel):
    id: str
    lat: float
    lon: float
    max_probability: float
    mean_probability: float
    tile_count: int
    status: Literal["pending", "confirmed", "rejected"]
    facility_type: Optional[Literal["oil_refinery", "crude_oil_terminal", "lng_terminal"]] = None
    tank_count: Optional[int] = None
    reviewer: str = ""
    reviewed_at: Optional[str] = None


class DetectionPage(BaseModel):
    items: list[DetectionOut]
    total: int
    page: int
    page_size: int


class ReviewRequest(BaseModel):
    action: Literal["classify", "reject", "reopen"]
    facility_type: Optional[Literal["oil_refinery", "crude_oil_terminal", "lng_terminal"]] = None
    tank_count: Optional[int] = Field(default=None, ge=0)
    reviewer: str = "anonymous"


class Table1RowOut(BaseModel):
    total_detections: int
    coverage_percent: str
    covered: int
    cluster_total: int
    new_detections: int


class Table1Out(BaseModel):
    oil_refinery: Table1RowOut
    petroleum_terminal: Table1RowOut


class StatusCounts(BaseModel):
    pending: int
    confirmed: int
    rejected: int
