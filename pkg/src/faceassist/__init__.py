"""faceassist: face detection and recognition toolkit.

Haar-cascade detection, LBPH recognition, a capped enrolment database with
encrypted identities, an offline/online processing pipeline with server
offload, and an evaluation CLI.
"""

from .cascade import CascadeModel, DetectParams, detect, group_rectangles, load_cascade_json, parse_cascade_xml, save_cascade_json
from .facestore import FaceStore, PersonRecord, StoreConfig, load_store
from .imaging import GrayImage, IntegralImage, Rect, crop, integral, load_pgm, rect_sum, resize_bilinear, rgb_to_gray, save_pgm
from .lbph import LbpParams, PredictionResult, RecognizerModel, extract_template, predict, train
from .pipeline import Pipeline, PipelineConfig, PipelineEvent, PipelineMode

__version__ = "0.1.0"

__all__ = [
    "CascadeModel",
    "DetectParams",
    "FaceStore",
    "GrayImage",
    "IntegralImage",
    "LbpParams",
    "PersonRecord",
    "Pipeline",
    "PipelineConfig",
    "PipelineEvent",
    "PipelineMode",
    "PredictionResult",
    "RecognizerModel",
    "Rect",
    "StoreConfig",
    "crop",
    "detect",
    "extract_template",
    "group_rectangles",
    "integral",
    "load_cascade_json",
    "load_pgm",
    "load_store",
    "parse_cascade_xml",
    "predict",
    "rect_sum",
    "resize_bilinear",
    "rgb_to_gray",
    "save_cascade_json",
    "save_pgm",
    "train",
    "__version__",
]
