"""Shared fixtures: synthetic images, toy cascades, and store helpers."""

from __future__ import annotations

import numpy as np
import pytest

from faceassist.cascade import (
    CascadeModel,
    FeaturePart,
    HaarFeature,
    Stage,
    WeakStump,
)
from faceassist.imaging import GrayImage, Rect


def random_image(rng: np.random.Generator, max_side: int = 64, min_side: int = 1) -> GrayImage:
    w = int(rng.integers(min_side, max_side + 1))
    h = int(rng.integers(min_side, max_side + 1))
    return GrayImage(w, h, rng.integers(0, 256, size=(h, w), dtype=np.uint8))


def synthetic_face(seed: int, size: int = 64) -> GrayImage:
    """Deterministic noise face; different seeds give distinct templates."""
    rng = np.random.default_rng(seed)
    return GrayImage(size, size, rng.integers(0, 256, size=(size, size), dtype=np.uint8))


def contrast_cascade(
    window_w: int = 16,
    window_h: int = 16,
    stump_threshold: float = 0.5,
    stage_threshold: float = 0.0,
) -> CascadeModel:
    """One-stage left-dark/right-bright contrast detector.

    With stump_threshold 0.5 a window whose left half is 0 and right half
    255 scores +1 and passes, while constant windows score -1 and fail.
    """
    half = window_w // 2
    feature = HaarFeature(
        (
            FeaturePart(Rect(0, 0, half, window_h), -1.0),
            FeaturePart(Rect(half, 0, half, window_h), 1.0),
        )
    )
    stump = WeakStump(feature, stump_threshold, -1.0, 1.0)
    return CascadeModel(window_w, window_h, (Stage((stump,), stage_threshold),))


def plant_contrast_block(img_px: np.ndarray, x: int, y: int, w: int, h: int):
    """Write a left-dark/right-bright block matching the contrast cascade."""
    half = w // 2
    img_px[y : y + h, x : x + half] = 0
    img_px[y : y + h, x + half : x + w] = 255


def planted_frame(
    width: int, height: int, x: int, y: int, size: int, background: int = 128
) -> tuple[GrayImage, Rect]:
    px = np.full((height, width), background, np.uint8)
    plant_contrast_block(px, x, y, size, size)
    return GrayImage(width, height, px), Rect(x, y, size, size)


@pytest.fixture
def store_env(monkeypatch, tmp_path):
    """A StoreConfig rooted in tmp_path with the key env var set."""
    from faceassist.facestore import StoreConfig

    monkeypatch.setenv("FACEASSIST_TEST_KEY", "correct horse battery staple")

    def make(capacity: int = 10, subdir: str = "store"):
        return StoreConfig(
            root_directory=tmp_path / subdir,
            capacity=capacity,
            encryption_key_source="FACEASSIST_TEST_KEY",
        )

    return make
