"""Sequential full-image segmentation.

Start from an all-ones ROI, repeatedly sample a pointer inside it,
predict that pointer's segment, clip the prediction to the remaining
ROI, assign it the next id, and remove it from the ROI.  Stops once
labeled coverage reaches coverage_stop or after max_steps.  A
prediction that is empty, misses its own pointer, or falls below
min_segment_area degrades to the single pointer pixel, so every step
shrinks the ROI and termination is guaranteed; such steps are flagged
in the trace.

The engine takes any predict(pointer, roi_input) -> mask function, so
stubs can drive it in tests.  In the no-ROI ablation the net sees an
all-ones ROI input, but clipping still uses the true remaining ROI;
only the input pathway is ablated.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .masks import LabelMap, UNLABELED_META, coverage, sample_pixel, subtract
from .network import PointerSegNet, predict_mask
from .seeds import rng_for


@dataclass(frozen=True)
class CascadeConfig:
    coverage_stop: float = 0.95
    max_steps: int | None = None   # None: H*W
    use_roi: bool = True
    min_segment_area: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.coverage_stop <= 1.0:
            raise ValueError("coverage_stop must lie in (0, 1]")


@dataclass
class CascadeTrace:
    steps: list = field(default_factory=list)
    labels: LabelMap | None = None

    def fallback_rate(self) -> float:
        if not self.steps:
            return 0.0
        return sum(s["fallback"] for s in self.steps) / len(self.steps)

    def to_json(self) -> str:
        return json.dumps({"steps": self.steps}, indent=1)


def _roi_hash(roi: np.ndarray) -> str:
    return hashlib.sha256(np.packbits(roi).tobytes()).hexdigest()[:16]


def run_cascade(predict, height: int, width: int, config: CascadeConfig,
                rng=None):
    """Drive the loop with an arbitrary predictor; returns (LabelMap, trace).

    predict(pointer, roi_input) must return an (H, W) bool mask; the
    engine intersects it with the true remaining ROI before accepting.
    """
    if rng is None:
        rng = rng_for(config.seed, "cascade")
    labels = LabelMap.empty(height, width)
    roi = np.ones((height, width), dtype=bool)
    ones = np.ones((height, width), dtype=bool)
    max_steps = config.max_steps if config.max_steps is not None else height * width
    trace = CascadeTrace()

    while coverage(labels) < config.coverage_stop and len(trace.steps) < max_steps:
        roi_before = roi
        pointer = sample_pixel(roi_before, rng)
        roi_input = roi_before if config.use_roi else ones
        raw = np.asarray(predict(pointer, roi_input), dtype=bool)
        mask = raw & roi_before
        predicted_area = int(mask.sum())
        fallback = (
            predicted_area < config.min_segment_area or not mask[pointer]
        )
        if fallback:
            mask = np.zeros((height, width), dtype=bool)
            mask[pointer] = True
        segment_id = labels.add_segment(mask, UNLABELED_META)
        roi = subtract(roi_before, mask)
        assert roi.sum() < roi_before.sum(), "cascade step failed to shrink the ROI"
        trace.steps.append({
            "pointer": [int(pointer[0]), int(pointer[1])],
            "roi_hash": _roi_hash(roi_before),
            "roi_area": int(roi.sum()),
            "predicted_area": predicted_area,
            "accepted_area": int(mask.sum()),
            "fallback": bool(fallback),
            "segment_id": segment_id,
        })
    trace.labels = labels
    return labels, trace


def segment_image(net: PointerSegNet, image: np.ndarray, config: CascadeConfig,
                  rng=None):
    """Full-image segmentation of one image with a trained net."""

    def predict(pointer, roi_input):
        logits = net.forward(image, pointer, roi_input)
        return predict_mask(logits, np.ones(roi_input.shape, dtype=bool),
                            net.arch.threshold)

    h, w = image.shape[1], image.shape[2]
    return run_cascade(predict, h, w, config, rng=rng)
