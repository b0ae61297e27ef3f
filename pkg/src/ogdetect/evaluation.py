"""Classification metrics, operating-point selection, checkpoint selection,
and dataset-split bookkeeping for labeled tile scores."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .pipeline import OperatingPoint

LABELS = ("positive", "negative")
SPLITS = ("train", "validation", "test")
NEGATIVE_CATEGORIES = ("random", "urban", "well_pad", "cropland", "forest", "snow", "other")


@dataclass(frozen=True)
class LabeledScore:
    example_id: str
    label: str
    probability: float
    split: str
    negative_category: str | None = None

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise ValueError(f"unknown label: {self.label!r}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split: {self.split!r}")
        if not (math.isfinite(self.probability) and 0.0 <= self.probability <= 1.0):
            raise ValueError(f"probability out of range: {self.probability}")
        if self.negative_category is not None:
            if self.label != "negative":
                raise ValueError("negative_category is only valid on negative examples")
            if self.negative_category not in NEGATIVE_CATEGORIES:
                raise ValueError(f"unknown negative_category: {self.negative_category!r}")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float


def confusion(scores: Sequence[LabeledScore], threshold: float) -> ConfusionCounts:
    """Count tp/fp/fn/tn with prediction = (probability >= threshold)."""
    tp = fp = fn = tn = 0
    for s in scores:
        predicted_positive = s.probability >= threshold
        if s.label == "positive":
            if predicted_positive:
                tp += 1
            else:
                fn += 1
        else:
            if predicted_positive:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def compute_metrics(c: ConfusionCounts) -> MetricsReport:
    """Accuracy, precision, recall, F1 from confusion counts.

    Degenerate ratios (empty denominator) are reported as 0 rather than
    undefined so reports stay total.
    """
    if c.total == 0:
        raise ValueError("cannot compute metrics on all-zero counts")
    accuracy = (c.tp + c.tn) / c.total
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) > 0 else 0.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if (precision + recall) > 0
        else 0.0
    )
    return MetricsReport(accuracy=accuracy, precision=precision, recall=recall, f1=f1)


def select_operating_point(scores: Sequence[LabeledScore]) -> OperatingPoint:
    """Threshold maximizing precision subject to recall exactly 1.0.

    Candidates are the distinct observed probabilities plus 0; ties are broken
    toward the larger threshold. Callers restrict the input to the validation
    split. Feasibility is guaranteed: the minimum positive score achieves
    recall 1.0.
    """
    positives = np.array([s.probability for s in scores if s.label == "positive"])
    if positives.size == 0:
        raise ValueError("operating point undefined without positive examples")
    negatives = np.sort(np.array([s.probability for s in scores if s.label == "negative"]))
    candidates = np.unique(
        np.concatenate([positives, negatives, [0.0]])
    )
    # recall is 1.0 exactly on candidates at or below the lowest positive
    feasible = candidates[candidates <= positives.min()]
    false_pos = negatives.size - np.searchsorted(negatives, feasible, side="left")
    precision = positives.size / (positives.size + false_pos)
    best = int(np.flatnonzero(precision == precision.max())[-1])  # largest tau wins
    return OperatingPoint(float(feasible[best]))


def select_checkpoint(validation_losses: Sequence[float]) -> int:
    """Index of the lowest validation loss; earliest epoch wins ties."""
    if len(validation_losses) == 0:
        raise ValueError("no validation losses")
    best_idx = 0
    for i, loss in enumerate(validation_losses):
        if loss < validation_losses[best_idx]:
            best_idx = i
    return best_idx


def split_summary(
    scores: Iterable[LabeledScore],
    expected: Mapping[str, Mapping[str, int]] | None = None,
) -> dict[str, dict[str, int]]:
    """Per-split positive/negative counts.

    When ``expected`` is given, mismatching counts raise a ValueError naming
    the offending cells.
    """
    counts: dict[str, dict[str, int]] = {
        split: {label: 0 for label in LABELS} for split in SPLITS
    }
    for s in scores:
        counts[s.split][s.label] += 1
    if expected is not None:
        mismatches = []
        for split, labels in expected.items():
            for label, want in labels.items():
                got = counts.get(split, {}).get(label, 0)
                if got != want:
                    mismatches.append(f"{split}/{label}: expected {want}, got {got}")
        if mismatches:
            raise ValueError("split summary mismatch: " + "; ".join(mismatches))
    return counts


# --------------------------------------------------------------------------
# File formats

_CSV_HEADER = ["id", "split", "label", "probability", "negative_category"]


def read_labeled_scores_csv(path: Path) -> list[LabeledScore]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing labeled scores file: {path}")
    out = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _CSV_HEADER:
            raise ValueError(f"bad labeled-scores header {reader.fieldnames} in {path}")
        for rec in reader:
            category = rec["negative_category"] or None
            out.append(
                LabeledScore(
                    example_id=rec["id"],
                    split=rec["split"],
                    label=rec["label"],
                    probability=float(rec["probability"]),
                    negative_category=category,
                )
            )
    return out


def write_labeled_scores_csv(path: Path, scores: Sequence[LabeledScore]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for s in scores:
            writer.writerow(
                [s.example_id, s.split, s.label, repr(s.probability), s.negative_category or ""]
            )


def metrics_report_dict(c: ConfusionCounts, m: MetricsReport, threshold: float) -> dict:
    return {
        "threshold": threshold,
        "counts": {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn},
        "accuracy": m.accuracy,
        "precision": m.precision,
        "recall": m.recall,
        "f1": m.f1,
    }


def write_metrics_report(path: Path, c: ConfusionCounts, m: MetricsReport, threshold: float) -> None:
    Path(path).write_text(
        json.dumps(metrics_report_dict(c, m, threshold), sort_keys=True, indent=2) + "\n"
    )
