"""Visualization helpers: segment overlays on images."""

import numpy as np

from .masks import LabelMap
from .seeds import rng_for

# fixed stream root so the same id always maps to the same color
_COLOR_SEED = 0xC0108


def segment_color(segment_id: int) -> np.ndarray:
    """Deterministic pseudo-random RGB for a segment id, away from black."""
    rng = rng_for(_COLOR_SEED, "overlay", segment_id)
    return (rng.random(3) * 0.85 + 0.15).astype(np.float32)


def overlay(image: np.ndarray, labels: LabelMap, alpha: float = 0.55) -> np.ndarray:
    """Blend per-segment colors over an image.

    image: (3, H, W) float in [0, 1].  Unlabeled pixels (id 0) keep the
    original image; labeled pixels get `alpha` of the segment color.
    """
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"expected a (3, H, W) image, got {image.shape}")
    if image.shape[1:] != labels.ids.shape:
        raise ValueError(
            f"image is {image.shape[1:]}, labels are {labels.ids.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    out = image.astype(np.float32).copy()
    for sid in labels.segment_ids():
        mask = labels.ids == sid
        color = segment_color(int(sid)).reshape(3, 1)
        out[:, mask] = (1.0 - alpha) * out[:, mask] + alpha * color
    return np.clip(out, 0.0, 1.0)


def pointer_marker(image: np.ndarray, pointer, radius: int = 1) -> np.ndarray:
    """Stamp a white cross at a pointer location (for rendered traces)."""
    out = image.astype(np.float32).copy()
    h, w = out.shape[1:]
    r, c = pointer
    for d in range(-radius, radius + 1):
        if 0 <= r + d < h:
            out[:, r + d, c] = 1.0
        if 0 <= c + d < w:
            out[:, r, c + d] = 1.0
    return out
