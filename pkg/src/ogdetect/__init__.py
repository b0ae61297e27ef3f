"""Facility detection over aerial tile grids: scoring, merging, evaluation,
benchmark comparison, and a human-review service."""

__version__ = "0.1.0"
