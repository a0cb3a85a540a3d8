"""Local Binary Patterns Histograms face recognition.

A face is resized to a canonical size, every interior pixel is encoded as
an 8-bit comparison code against its 3x3 neighbourhood, the code image is
split into a grid of regions whose normalized 256-bin histograms are
concatenated into the feature vector, and identification is nearest
neighbour under the symmetric chi-square distance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .imaging import GrayImage, resize_bilinear

# Neighbour offsets (dy, dx), clockwise from the top-left corner; the bit
# for offset i is 1 when center >= neighbour and lands at position 7 - i
# (first neighbour most significant).
NEIGHBOR_OFFSETS = (
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
)


@dataclass(frozen=True)
class LbpParams:
    grid_x: int = 8
    grid_y: int = 8
    face_w: int = 100
    face_h: int = 100
    unknown_threshold: float = 0.5

    def __post_init__(self):
        if self.grid_x < 1 or self.grid_y < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.face_w < self.grid_x + 2 or self.face_h < self.grid_y + 2:
            raise ValueError("canonical face size must be at least grid + 2")
        if self.unknown_threshold < 0:
            raise ValueError("unknown_threshold must be >= 0")

    @property
    def template_length(self) -> int:
        return self.grid_x * self.grid_y * 256


@dataclass(frozen=True)
class ModelEntry:
    label: str
    template: np.ndarray


@dataclass(frozen=True)
class RecognizerModel:
    params: LbpParams
    entries: tuple[ModelEntry, ...]


@dataclass(frozen=True)
class PredictionResult:
    label: str | None
    distance: float
    is_known: bool


def lbp_code(img: GrayImage, x: int, y: int) -> int:
    """8-bit neighbourhood code of one interior pixel."""
    if not (1 <= x <= img.width - 2 and 1 <= y <= img.height - 2):
        raise ValueError(f"({x}, {y}) lies on the border of {img!r}")
    px = img.pixels
    center = int(px[y, x])
    code = 0
    for i, (dy, dx) in enumerate(NEIGHBOR_OFFSETS):
        if center >= int(px[y + dy, x + dx]):
            code |= 1 << (7 - i)
    return code


def lbp_image(img: GrayImage) -> GrayImage:
    """Code image of all interior pixels; output is (w-2) x (h-2)."""
    if img.width < 3 or img.height < 3:
        raise ValueError("image must be at least 3x3")
    px = img.pixels
    center = px[1:-1, 1:-1]
    codes = np.zeros(center.shape, np.uint8)
    h, w = px.shape
    for i, (dy, dx) in enumerate(NEIGHBOR_OFFSETS):
        nb = px[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
        codes |= (center >= nb).astype(np.uint8) << (7 - i)
    return GrayImage(img.width - 2, img.height - 2, codes)


def spatial_histogram(codes: GrayImage, params: LbpParams) -> np.ndarray:
    """Concatenated per-region normalized 256-bin histograms, row-major.

    Region r of gridN spans floor(r * extent / gridN) to
    floor((r+1) * extent / gridN); every region histogram sums to 1.
    """
    if codes.width < params.grid_x or codes.height < params.grid_y:
        raise ValueError(
            f"code image {codes.width}x{codes.height} smaller than the "
            f"{params.grid_x}x{params.grid_y} grid"
        )
    arr = codes.pixels
    pieces = []
    for ry in range(params.grid_y):
        y0 = ry * codes.height // params.grid_y
        y1 = (ry + 1) * codes.height // params.grid_y
        for rx in range(params.grid_x):
            x0 = rx * codes.width // params.grid_x
            x1 = (rx + 1) * codes.width // params.grid_x
            region = arr[y0:y1, x0:x1]
            hist = np.bincount(region.ravel(), minlength=256).astype(np.float64)
            pieces.append(hist / region.size)
    out = np.concatenate(pieces)
    out.setflags(write=False)
    return out


def chi_square_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric chi-square: sum of (a-b)^2 / (a+b) over bins with mass."""
    if a.shape != b.shape:
        raise ValueError(f"template length mismatch: {a.shape} vs {b.shape}")
    s = a + b
    d = a - b
    mask = s > 0
    return float(np.sum(d[mask] * d[mask] / s[mask]))


def extract_template(face: GrayImage, params: LbpParams | None = None) -> np.ndarray:
    """Resize to the canonical face size, encode, and histogram."""
    params = params or LbpParams()
    canonical = resize_bilinear(face, params.face_w, params.face_h)
    return spatial_histogram(lbp_image(canonical), params)


def train(faces: list[tuple[GrayImage, str]], params: LbpParams | None = None) -> RecognizerModel:
    """Build a recognizer holding one template per (face, label) pair."""
    params = params or LbpParams()
    if not faces:
        raise ValueError("cannot train on an empty face list")
    entries = tuple(
        ModelEntry(label, extract_template(face, params)) for face, label in faces
    )
    return RecognizerModel(params, entries)


def nearest(model: RecognizerModel, template: np.ndarray) -> PredictionResult:
    """Nearest enrolled template by chi-square; ties keep the earliest entry."""
    if not model.entries:
        raise ValueError("recognizer model is empty")
    best_i = 0
    best_d = chi_square_distance(model.entries[0].template, template)
    for i in range(1, len(model.entries)):
        d = chi_square_distance(model.entries[i].template, template)
        if d < best_d:
            best_i, best_d = i, d
    return PredictionResult(
        label=model.entries[best_i].label,
        distance=best_d,
        is_known=best_d <= model.params.unknown_threshold,
    )


def predict(model: RecognizerModel, face: GrayImage) -> PredictionResult:
    """Identify a face against the model."""
    return nearest(model, extract_template(face, model.params))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def save_model_json(model: RecognizerModel) -> bytes:
    doc = {
        "params": {
            "gridX": model.params.grid_x,
            "gridY": model.params.grid_y,
            "faceW": model.params.face_w,
            "faceH": model.params.face_h,
            "unknownThreshold": model.params.unknown_threshold,
        },
        "entries": [
            {"label": e.label, "histogram": e.template.tolist()} for e in model.entries
        ],
    }
    return json.dumps(doc).encode("utf-8")


def load_model_json(data: bytes) -> RecognizerModel:
    doc = json.loads(data)
    p = doc["params"]
    params = LbpParams(
        grid_x=int(p["gridX"]),
        grid_y=int(p["gridY"]),
        face_w=int(p["faceW"]),
        face_h=int(p["faceH"]),
        unknown_threshold=float(p["unknownThreshold"]),
    )
    entries = []
    for e in doc["entries"]:
        template = np.asarray(e["histogram"], np.float64)
        if template.size != params.template_length:
            raise ValueError(
                f"histogram length {template.size} does not match params "
                f"({params.template_length})"
            )
        template.setflags(write=False)
        entries.append(ModelEntry(str(e["label"]), template))
    return RecognizerModel(params, tuple(entries))
