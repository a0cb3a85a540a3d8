"""Boosted-cascade face detector: model types, legacy XML and native JSON
loaders, variance-normalized window evaluation, multi-scale sliding-window
scan and rectangle grouping.
"""

from __future__ import annotations

import json
import math
import warnings
import xml.etree.ElementTree as ET
from dataclasses import dataclass

import numpy as np

from .imaging import GrayImage, IntegralImage, Rect, integral, rect_sum, squared_rect_sum


class CascadeFormatError(ValueError):
    """The cascade description violates the expected structure."""


class UnsupportedCascadeError(CascadeFormatError):
    """Legal legacy-XML content this detector deliberately does not handle
    (tilted features, trees deeper than a stump)."""


class CascadeWarning(UserWarning):
    """Non-fatal oddity noticed while loading a cascade."""


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class FeaturePart:
    rect: Rect
    weight: float


@dataclass(frozen=True)
class HaarFeature:
    parts: tuple[FeaturePart, ...]

    def __post_init__(self):
        if len(self.parts) not in (2, 3):
            raise CascadeFormatError(
                f"a Haar feature needs 2 or 3 weighted rects, got {len(self.parts)}"
            )


@dataclass(frozen=True)
class WeakStump:
    feature: HaarFeature
    threshold: float
    left_value: float
    right_value: float

    def __post_init__(self):
        if self.left_value == self.right_value:
            raise CascadeFormatError("constant stump: left and right values are equal")


@dataclass(frozen=True)
class Stage:
    stumps: tuple[WeakStump, ...]
    stage_threshold: float

    def __post_init__(self):
        if not self.stumps:
            raise CascadeFormatError("stage has no stumps")


@dataclass(frozen=True)
class CascadeModel:
    window_w: int
    window_h: int
    stages: tuple[Stage, ...]

    def __post_init__(self):
        if self.window_w < 1 or self.window_h < 1:
            raise CascadeFormatError("window size must be >= 1")
        if not self.stages:
            raise CascadeFormatError("cascade has no stages")
        for stage in self.stages:
            for stump in stage.stumps:
                for part in stump.feature.parts:
                    r = part.rect
                    if r.x + r.w > self.window_w or r.y + r.h > self.window_h:
                        raise CascadeFormatError(
                            f"feature rect {r} exceeds the {self.window_w}x{self.window_h} window"
                        )


@dataclass(frozen=True)
class DetectParams:
    """Scan parameters; the defaults follow common sliding-window practice."""

    scale_factor: float = 1.1
    min_neighbors: int = 3
    min_size: tuple[int, int] | None = None  # None: the model's base window
    step_fraction: float = 0.05
    grouping_eps: float = 0.2

    def __post_init__(self):
        if self.scale_factor <= 1.0:
            raise ValueError("scale_factor must be > 1")
        if self.min_neighbors < 0:
            raise ValueError("min_neighbors must be >= 0")
        if not 0.0 < self.step_fraction <= 1.0:
            raise ValueError("step_fraction must lie in (0, 1]")
        if self.grouping_eps < 0.0:
            raise ValueError("grouping_eps must be >= 0")
        if self.min_size is not None and (self.min_size[0] < 1 or self.min_size[1] < 1):
            raise ValueError("min_size must be >= 1")


def _warn_if_not_zero_mean(model: CascadeModel):
    # Standard two/three-rect features have weights chosen so the weighted
    # areas cancel; a large residual usually means a mis-authored file.
    for si, stage in enumerate(model.stages):
        for stump in stage.stumps:
            terms = [p.weight * p.rect.area for p in stump.feature.parts]
            largest = max(abs(t) for t in terms)
            if largest and abs(sum(terms)) > 0.05 * largest:
                warnings.warn(
                    f"feature in stage {si} is not zero-mean "
                    f"(residual {sum(terms):g} vs largest term {largest:g})",
                    CascadeWarning,
                    stacklevel=3,
                )


# ---------------------------------------------------------------------------
# Legacy Haar cascade XML
# ---------------------------------------------------------------------------

def parse_cascade_xml(text: str) -> CascadeModel:
    """Parse the legacy stump-based Haar cascade XML interchange format."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise CascadeFormatError(f"not well-formed XML: {exc}") from None

    cascade_el = None
    for el in root.iter():
        if el.find("size") is not None and el.find("stages") is not None:
            cascade_el = el
            break
    if cascade_el is None:
        raise CascadeFormatError("no element with <size> and <stages> found")

    size_tokens = (cascade_el.findtext("size") or "").split()
    if len(size_tokens) != 2:
        raise CascadeFormatError("window <size> must hold two integers")
    try:
        window_w, window_h = int(size_tokens[0]), int(size_tokens[1])
    except ValueError:
        raise CascadeFormatError(f"malformed window size {size_tokens}") from None

    stages = []
    for si, stage_el in enumerate(cascade_el.find("stages")):
        thr_text = stage_el.findtext("stage_threshold")
        if thr_text is None:
            raise CascadeFormatError(f"stage {si} is missing stage_threshold")
        stumps = []
        trees_el = stage_el.find("trees")
        if trees_el is None:
            raise CascadeFormatError(f"stage {si} has no <trees>")
        for tree_el in trees_el:
            nodes = list(tree_el)
            if len(nodes) != 1:
                raise UnsupportedCascadeError(
                    f"stage {si}: tree with {len(nodes)} nodes; only single stumps are supported"
                )
            stumps.append(_parse_stump(nodes[0], si, window_w, window_h))
        try:
            stages.append(Stage(tuple(stumps), _parse_real(thr_text, si)))
        except CascadeFormatError:
            raise
    model = CascadeModel(window_w, window_h, tuple(stages))
    _warn_if_not_zero_mean(model)
    return model


def _parse_real(text: str, stage_index: int) -> float:
    try:
        return float(text.strip())
    except (ValueError, AttributeError):
        raise CascadeFormatError(
            f"stage {stage_index}: malformed number {text!r}"
        ) from None


def _parse_stump(node: ET.Element, stage_index: int, window_w: int, window_h: int) -> WeakStump:
    if node.find("left_node") is not None or node.find("right_node") is not None:
        raise UnsupportedCascadeError(
            f"stage {stage_index}: node with child nodes; only single stumps are supported"
        )
    feature_el = node.find("feature")
    if feature_el is None:
        raise CascadeFormatError(f"stage {stage_index}: stump without <feature>")
    tilted_text = feature_el.findtext("tilted")
    if tilted_text is not None and tilted_text.strip() not in ("0", ""):
        raise UnsupportedCascadeError(
            f"stage {stage_index}: tilted features are not supported"
        )
    rects_el = feature_el.find("rects")
    if rects_el is None:
        raise CascadeFormatError(f"stage {stage_index}: feature without <rects>")
    parts = []
    for rect_el in rects_el:
        tokens = (rect_el.text or "").split()
        if len(tokens) != 5:
            raise CascadeFormatError(
                f"stage {stage_index}: rect entry must be 'x y w h weight', got {rect_el.text!r}"
            )
        try:
            x, y, w, h = (int(t) for t in tokens[:4])
            weight = float(tokens[4])
        except ValueError:
            raise CascadeFormatError(
                f"stage {stage_index}: malformed rect numbers {rect_el.text!r}"
            ) from None
        try:
            rect = Rect(x, y, w, h)
        except ValueError as exc:
            raise CascadeFormatError(f"stage {stage_index}: {exc}") from None
        if x + w > window_w or y + h > window_h:
            raise CascadeFormatError(
                f"stage {stage_index}: rect {rect} lies outside the "
                f"{window_w}x{window_h} window"
            )
        parts.append(FeaturePart(rect, weight))
    threshold = _parse_real(node.findtext("threshold"), stage_index)
    left = _parse_real(node.findtext("left_val"), stage_index)
    right = _parse_real(node.findtext("right_val"), stage_index)
    return WeakStump(HaarFeature(tuple(parts)), threshold, left, right)


# ---------------------------------------------------------------------------
# Native JSON format
# ---------------------------------------------------------------------------

def save_cascade_json(model: CascadeModel) -> bytes:
    doc = {
        "windowW": model.window_w,
        "windowH": model.window_h,
        "stages": [
            {
                "stageThreshold": stage.stage_threshold,
                "stumps": [
                    {
                        "threshold": stump.threshold,
                        "leftValue": stump.left_value,
                        "rightValue": stump.right_value,
                        "feature": {
                            "parts": [
                                {
                                    "x": p.rect.x,
                                    "y": p.rect.y,
                                    "w": p.rect.w,
                                    "h": p.rect.h,
                                    "weight": p.weight,
                                }
                                for p in stump.feature.parts
                            ]
                        },
                    }
                    for stump in stage.stumps
                ],
            }
            for stage in model.stages
        ],
    }
    return json.dumps(doc, indent=2).encode("utf-8")


def load_cascade_json(data: bytes) -> CascadeModel:
    """Load the native cascade JSON; unknown extra fields are ignored."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise CascadeFormatError(f"invalid JSON: {exc}") from None
    try:
        stages = tuple(
            Stage(
                tuple(
                    WeakStump(
                        HaarFeature(
                            tuple(
                                FeaturePart(
                                    Rect(int(p["x"]), int(p["y"]), int(p["w"]), int(p["h"])),
                                    float(p["weight"]),
                                )
                                for p in stump["feature"]["parts"]
                            )
                        ),
                        float(stump["threshold"]),
                        float(stump["leftValue"]),
                        float(stump["rightValue"]),
                    )
                    for stump in stage["stumps"]
                ),
                float(stage["stageThreshold"]),
            )
            for stage in doc["stages"]
        )
        model = CascadeModel(int(doc["windowW"]), int(doc["windowH"]), stages)
    except CascadeFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CascadeFormatError(f"cascade JSON schema violation: {exc!r}") from None
    _warn_if_not_zero_mean(model)
    return model


# ---------------------------------------------------------------------------
# Window evaluation
# ---------------------------------------------------------------------------

def window_stats(ii: IntegralImage, window: Rect) -> tuple[float, float]:
    """Mean and standard deviation of a window; stddev floored at 1 so
    constant windows never divide by zero downstream."""
    area = window.area
    mean = rect_sum(ii, window) / area
    var = squared_rect_sum(ii, window) / area - mean * mean
    return mean, math.sqrt(max(var, 1.0))


def _scaled_parts(stump: WeakStump, s: float) -> list[tuple[int, int, int, int, float]]:
    out = []
    for p in stump.feature.parts:
        out.append(
            (
                _round_half_up(p.rect.x * s),
                _round_half_up(p.rect.y * s),
                _round_half_up(p.rect.w * s),
                _round_half_up(p.rect.h * s),
                p.weight,
            )
        )
    return out


def evaluate_window(
    model: CascadeModel, ii: IntegralImage, window: Rect
) -> tuple[bool, int | None]:
    """Run every stage over one window.

    Returns (accepted, rejected_at_stage); feature sums are normalized by
    window area times the window's stddev, and each part rect is scaled by
    multiplying every coordinate by the window scale and rounding.
    """
    s = window.w / model.window_w
    if abs(model.window_h * s - window.h) > 1.0:
        raise ValueError(
            f"window {window} is not a uniform scaling of the "
            f"{model.window_w}x{model.window_h} base window"
        )
    _, sd = window_stats(ii, window)
    inv_norm = 1.0 / (window.w * window.h * sd)
    for si, stage in enumerate(model.stages):
        total = 0.0
        for stump in stage.stumps:
            fsum = 0.0
            for x, y, w, h, weight in _scaled_parts(stump, s):
                fsum += weight * rect_sum(ii, Rect(window.x + x, window.y + y, w, h))
            f_hat = fsum * inv_norm
            # Strict comparison: a value exactly on the threshold goes right.
            total += stump.left_value if f_hat < stump.threshold else stump.right_value
        if total < stage.stage_threshold:
            return False, si
    return True, None


# ---------------------------------------------------------------------------
# Multi-scale scan
# ---------------------------------------------------------------------------

def _scan_scale(
    model: CascadeModel,
    ii: IntegralImage,
    sw: int,
    sh: int,
    step: int,
    scale: float,
) -> list[Rect]:
    """Vectorized evaluation of every grid position at one scale."""
    stumps_scaled = [
        [(_scaled_parts(stump, scale), stump) for stump in stage.stumps]
        for stage in model.stages
    ]
    # Rounding can push a scaled part rect up to a couple of pixels past the
    # scaled window; shrink the scan range so every lookup stays in bounds.
    max_x_extent = sw
    max_y_extent = sh
    for stage_list in stumps_scaled:
        for parts, _ in stage_list:
            for x, y, w, h, _w in parts:
                max_x_extent = max(max_x_extent, x + w)
                max_y_extent = max(max_y_extent, y + h)

    nx = (ii.width - max_x_extent) // step + 1
    ny = (ii.height - max_y_extent) // step + 1
    if nx < 1 or ny < 1:
        return []

    sums = ii.sums
    sqs = ii.squared_sums

    def grid(table: np.ndarray, oy: int, ox: int) -> np.ndarray:
        return table[
            oy : oy + (ny - 1) * step + 1 : step,
            ox : ox + (nx - 1) * step + 1 : step,
        ]

    def rect_grid(table: np.ndarray, x: int, y: int, w: int, h: int) -> np.ndarray:
        return (
            grid(table, y + h, x + w).astype(np.float64)
            - grid(table, y, x + w)
            - grid(table, y + h, x)
            + grid(table, y, x)
        )

    area = float(sw * sh)
    wsum = rect_grid(sums, 0, 0, sw, sh)
    wsq = rect_grid(sqs, 0, 0, sw, sh)
    mean = wsum / area
    var = wsq / area - mean * mean
    inv_norm = 1.0 / (area * np.sqrt(np.maximum(var, 1.0)))

    # First stage over the full grid with strided views.
    stage0 = stumps_scaled[0]
    total = np.zeros((ny, nx))
    for parts, stump in stage0:
        f = np.zeros((ny, nx))
        for x, y, w, h, weight in parts:
            f += weight * rect_grid(sums, x, y, w, h)
        f *= inv_norm
        total += np.where(f < stump.threshold, stump.left_value, stump.right_value)
    alive = total >= model.stages[0].stage_threshold
    if not alive.any():
        return []

    # Later stages on the surviving positions only, via gathers.
    ay, ax = np.nonzero(alive)
    inv_alive = inv_norm[ay, ax]
    py = ay * step
    px = ax * step
    for stage_list, stage in zip(stumps_scaled[1:], model.stages[1:]):
        total = np.zeros(py.shape)
        for parts, stump in stage_list:
            f = np.zeros(py.shape)
            for x, y, w, h, weight in parts:
                f += weight * (
                    sums[py + y + h, px + x + w].astype(np.float64)
                    - sums[py + y, px + x + w]
                    - sums[py + y + h, px + x]
                    + sums[py + y, px + x]
                )
            f *= inv_alive
            total += np.where(f < stump.threshold, stump.left_value, stump.right_value)
        keep = total >= stage.stage_threshold
        py, px, inv_alive = py[keep], px[keep], inv_alive[keep]
        if py.size == 0:
            return []

    order = np.lexsort((px, py))
    return [Rect(int(px[i]), int(py[i]), sw, sh) for i in order]


def detect(model: CascadeModel, img: GrayImage, params: DetectParams | None = None) -> list[Rect]:
    """Multi-scale sliding-window detection.

    Returns grouped detections ordered by descending area, ties broken by
    (y, x).
    """
    params = params or DetectParams()
    if img.width < model.window_w or img.height < model.window_h:
        raise ValueError(
            f"image {img.width}x{img.height} smaller than the "
            f"{model.window_w}x{model.window_h} detection window"
        )
    min_w, min_h = params.min_size or (model.window_w, model.window_h)
    ii = integral(img)

    raw: list[Rect] = []
    k = 0
    while True:
        s = params.scale_factor**k
        sw = _round_half_up(model.window_w * s)
        sh = _round_half_up(model.window_h * s)
        if sw > img.width or sh > img.height:
            break
        if sw >= min_w and sh >= min_h:
            step = max(1, _round_half_up(params.step_fraction * sw))
            raw.extend(_scan_scale(model, ii, sw, sh, step, s))
        k += 1

    grouped = group_rectangles(raw, params.min_neighbors, params.grouping_eps)
    grouped.sort(key=lambda r: (-r.area, r.y, r.x))
    return grouped


# ---------------------------------------------------------------------------
# Rectangle grouping
# ---------------------------------------------------------------------------

def _rects_similar(a: Rect, b: Rect, eps: float) -> bool:
    delta = eps * 0.5 * (a.w + b.w)
    return (
        abs(a.x - b.x) <= delta
        and abs(a.y - b.y) <= delta
        and abs((a.x + a.w) - (b.x + b.w)) <= delta
        and abs((a.y + a.h) - (b.y + b.h)) <= delta
    )


def group_rectangles(rects: list[Rect], min_neighbors: int, eps: float) -> list[Rect]:
    """Merge near-duplicate detections.

    Rects are partitioned into connected components of the pairwise
    similarity relation; components smaller than max(1, min_neighbors) are
    dropped and each survivor is replaced by its rounded mean rect.

    Components are found by breadth-first search with one vectorized
    similarity sweep per member, so dense clusters of thousands of raw hits
    stay cheap.
    """
    n = len(rects)
    if n == 0:
        return []
    xs = np.array([r.x for r in rects], np.float64)
    ys = np.array([r.y for r in rects], np.float64)
    ws = np.array([r.w for r in rects], np.float64)
    hs = np.array([r.h for r in rects], np.float64)
    x2 = xs + ws
    y2 = ys + hs

    unvisited = np.ones(n, bool)
    needed = max(1, min_neighbors)
    out = []
    for seed in range(n):
        if not unvisited[seed]:
            continue
        unvisited[seed] = False
        frontier = [seed]
        members: list[int] = []
        while frontier:
            i = frontier.pop()
            members.append(i)
            delta = eps * 0.5 * (ws[i] + ws)
            similar = (
                unvisited
                & (np.abs(xs[i] - xs) <= delta)
                & (np.abs(ys[i] - ys) <= delta)
                & (np.abs(x2[i] - x2) <= delta)
                & (np.abs(y2[i] - y2) <= delta)
            )
            found = np.nonzero(similar)[0]
            if found.size:
                unvisited[found] = False
                frontier.extend(found.tolist())
        if len(members) < needed:
            continue
        idx = np.array(members)
        out.append(
            Rect(
                _round_half_up(float(xs[idx].sum()) / len(members)),
                _round_half_up(float(ys[idx].sum()) / len(members)),
                _round_half_up(float(ws[idx].sum()) / len(members)),
                _round_half_up(float(hs[idx].sum()) / len(members)),
            )
        )
    return out
