"""Corpus-driven evaluation: detection accuracy with greedy IoU matching,
per-person recognition accuracy, and deterministic report rendering."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

from .cascade import CascadeModel, DetectParams, detect
from .facestore import FaceStore
from .imaging import GrayImage, Rect, load_pgm
from .lbph import LbpParams, predict

FRAME_BUDGET_MS = 400.0


class EvalError(Exception):
    """Corpus or annotation problem that aborts an evaluation run."""


@dataclass(frozen=True)
class DetectionAnnotation:
    frame_id: str
    boxes: tuple[Rect, ...] = ()
    label: str | None = None


def load_annotations(path: Path) -> list[DetectionAnnotation]:
    """Parse the annotation JSON: a list of {frame, boxes?, label?} rows."""
    try:
        rows = json.loads(Path(path).read_bytes())
    except (OSError, json.JSONDecodeError) as exc:
        raise EvalError(f"cannot read annotations {path}: {exc}") from None
    if not isinstance(rows, list):
        raise EvalError("annotation file must hold a JSON list")
    out = []
    for row in rows:
        try:
            boxes = tuple(
                Rect(int(b["x"]), int(b["y"]), int(b["w"]), int(b["h"]))
                for b in row.get("boxes", [])
            )
            out.append(
                DetectionAnnotation(
                    frame_id=row["frame"], boxes=boxes, label=row.get("label")
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise EvalError(f"malformed annotation row {row!r}: {exc!r}") from None
    return out


@dataclass(frozen=True)
class DetectionReport:
    frames_with_faces: int
    detections: int
    correct: int
    incorrect: int

    def __post_init__(self):
        if self.detections != self.correct + self.incorrect:
            raise ValueError("detections must equal correct + incorrect")

    @property
    def accuracy_percent(self) -> float | None:
        if self.detections == 0:
            return None
        return 100.0 * self.correct / self.detections


@dataclass(frozen=True)
class RecognitionReport:
    experiments: int
    correct: int
    incorrect: int

    def __post_init__(self):
        if self.experiments != self.correct + self.incorrect:
            raise ValueError("experiments must equal correct + incorrect")

    @property
    def accuracy_percent(self) -> float | None:
        if self.experiments == 0:
            return None
        return 100.0 * self.correct / self.experiments


@dataclass(frozen=True)
class DetectionEvalResult:
    report: DetectionReport
    frame_times_ms: tuple[tuple[str, float], ...]
    slow_frames: tuple[str, ...]  # frames over the per-frame budget


def match_detections(
    detections: list[Rect], truth: list[Rect], iou_threshold: float
) -> int:
    """Greedy one-to-one matching by descending IoU; returns the number of
    detections matched to a ground-truth box at or above the threshold."""
    pairs = []
    for di, d in enumerate(detections):
        for ti, t in enumerate(truth):
            overlap = d.iou(t)
            if overlap >= iou_threshold:
                pairs.append((-overlap, di, ti))
    pairs.sort()
    used_d: set[int] = set()
    used_t: set[int] = set()
    correct = 0
    for _, di, ti in pairs:
        if di in used_d or ti in used_t:
            continue
        used_d.add(di)
        used_t.add(ti)
        correct += 1
    return correct


def _load_frame(corpus_dir: Path, frame_id: str) -> GrayImage:
    path = Path(corpus_dir) / frame_id
    try:
        return load_pgm(path.read_bytes())
    except OSError as exc:
        raise EvalError(f"missing frame {frame_id!r}: {exc}") from None


def eval_detection(
    corpus_dir: Path,
    annotations: list[DetectionAnnotation],
    cascade: CascadeModel,
    params: DetectParams | None = None,
    iou_threshold: float = 0.5,
) -> DetectionEvalResult:
    """Run the detector over an annotated frame corpus."""
    frames_with_faces = 0
    total = correct = 0
    times = []
    slow = []
    for ann in annotations:
        img = _load_frame(corpus_dir, ann.frame_id)
        started = time.perf_counter()
        boxes = detect(cascade, img, params)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        times.append((ann.frame_id, elapsed_ms))
        if elapsed_ms > FRAME_BUDGET_MS:
            slow.append(ann.frame_id)
        if ann.boxes:
            frames_with_faces += 1
        total += len(boxes)
        correct += match_detections(boxes, list(ann.boxes), iou_threshold)
    report = DetectionReport(
        frames_with_faces=frames_with_faces,
        detections=total,
        correct=correct,
        incorrect=total - correct,
    )
    return DetectionEvalResult(report, tuple(times), tuple(slow))


def eval_recognition(
    corpus_dir: Path,
    annotations: list[DetectionAnnotation],
    store: FaceStore,
    params: LbpParams | None = None,
) -> list[tuple[str, RecognitionReport]]:
    """Predict every labeled crop; per-person reports in first-seen order.

    A crop counts as correct when the nearest neighbour is its true person
    and the distance clears the unknown threshold.
    """
    enrolled = {r.id for r in store.records()}
    for ann in annotations:
        if ann.label is None:
            raise EvalError(f"annotation for {ann.frame_id!r} has no label")
        if ann.label not in enrolled:
            raise EvalError(f"label {ann.label!r} is not enrolled in the store")
    model = store.build_recognizer(params)
    counts: dict[str, list[int]] = {}
    order: list[str] = []
    for ann in annotations:
        img = _load_frame(corpus_dir, ann.frame_id)
        result = predict(model, img)
        if ann.label not in counts:
            counts[ann.label] = [0, 0]
            order.append(ann.label)
        ok = result.is_known and result.label == ann.label
        counts[ann.label][0 if ok else 1] += 1
    return [
        (
            person,
            RecognitionReport(
                experiments=c[0] + c[1], correct=c[0], incorrect=c[1]
            ),
        )
        for person, c in ((p, counts[p]) for p in order)
    ]


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    id: str
    frames_with_faces: int | None
    detections: int
    correct: int
    incorrect: int
    accuracy_percent: float | None


def detection_row(row_id: str, report: DetectionReport) -> ReportRow:
    return ReportRow(
        id=row_id,
        frames_with_faces=report.frames_with_faces,
        detections=report.detections,
        correct=report.correct,
        incorrect=report.incorrect,
        accuracy_percent=report.accuracy_percent,
    )


def recognition_row(row_id: str, report: RecognitionReport) -> ReportRow:
    return ReportRow(
        id=row_id,
        frames_with_faces=None,
        detections=report.experiments,
        correct=report.correct,
        incorrect=report.incorrect,
        accuracy_percent=report.accuracy_percent,
    )


def format_accuracy(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.2f}"


_COLUMNS = ("id", "framesWithFaces", "detections", "correct", "incorrect", "accuracy")


def _cells(row: ReportRow) -> tuple[str, ...]:
    return (
        row.id,
        "" if row.frames_with_faces is None else str(row.frames_with_faces),
        str(row.detections),
        str(row.correct),
        str(row.incorrect),
        format_accuracy(row.accuracy_percent),
    )


def render_table(rows: list[ReportRow]) -> str:
    """Aligned text table, rows in input order, accuracies at 2 dp."""
    grid = [_COLUMNS] + [_cells(r) for r in rows]
    widths = [max(len(line[c]) for line in grid) for c in range(len(_COLUMNS))]
    lines = []
    for line in grid:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render_csv(rows: list[ReportRow]) -> str:
    lines = [",".join(_COLUMNS)]
    for row in rows:
        lines.append(",".join(_cells(row)))
    return "\n".join(lines) + "\n"
