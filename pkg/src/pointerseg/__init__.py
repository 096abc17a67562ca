"""Pointer-conditioned class-agnostic segmentation.

A fully convolutional net takes an image, a pointer pixel, and a
region-of-interest mask, and returns the mask of the segment under the
pointer.  Running it in a cascade over the shrinking unlabeled region
stitches a full-image segmentation without ever naming a class.
"""

from .cascade import CascadeConfig, CascadeTrace, run_cascade, segment_image
from .masks import LabelMap, SegmentMeta, area, connected_components, coverage, iou
from .metrics import (
    FullImageReport,
    SingleSegReport,
    eval_full,
    eval_single,
    match_segments,
)
from .network import (
    ArchConfig,
    PointerSegNet,
    load_checkpoint,
    predict_mask,
    save_checkpoint,
)
from .sampling import TrainingSample, make_roi, make_sample, select_segment
from .scenes import Scene, SceneConfig, SceneStream, build_split, generate_scene
from .seeds import derive_seed, rng_for
from .tensor import Parameter, ParameterCollection, Tensor, backward
from .train import TrainConfig, overfit_sample, train

__version__ = "0.1.0"

__all__ = [
    "ArchConfig",
    "CascadeConfig",
    "CascadeTrace",
    "FullImageReport",
    "LabelMap",
    "Parameter",
    "ParameterCollection",
    "PointerSegNet",
    "Scene",
    "SceneConfig",
    "SceneStream",
    "SegmentMeta",
    "SingleSegReport",
    "Tensor",
    "TrainConfig",
    "TrainingSample",
    "area",
    "backward",
    "build_split",
    "connected_components",
    "coverage",
    "derive_seed",
    "eval_full",
    "eval_single",
    "generate_scene",
    "iou",
    "load_checkpoint",
    "make_roi",
    "make_sample",
    "match_segments",
    "overfit_sample",
    "predict_mask",
    "rng_for",
    "run_cascade",
    "save_checkpoint",
    "segment_image",
    "select_segment",
    "train",
    "__version__",
]
