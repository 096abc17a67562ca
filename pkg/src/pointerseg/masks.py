"""Binary-mask and label-map algebra.

A binary mask is a 2-d bool ndarray.  A LabelMap is a dense integer
grid (0 = unassigned) plus one metadata record per nonzero id.  All
operations are pure; nothing here touches the RNG except sample_pixel,
which takes the generator explicitly.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


def _check_mask(m, name: str = "mask") -> np.ndarray:
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def _check_same_dims(a, b, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: dimension mismatch {a.shape} vs {b.shape}")


def area(mask) -> int:
    return int(np.count_nonzero(_check_mask(mask)))


def connected_components(mask, connectivity: int = 4) -> list:
    """Split a mask into maximal connected regions.

    Ordered by decreasing area; ties broken by the smallest row-major
    index of the region's first cell, so the ordering is reproducible.
    """
    m = _check_mask(mask)
    if connectivity == 4:
        struct = _STRUCT_4
    elif connectivity == 8:
        struct = _STRUCT_8
    else:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labeled, n = ndimage.label(m, structure=struct)
    if n == 0:
        return []
    flat = labeled.ravel()
    areas = np.bincount(flat, minlength=n + 1)
    labels_seen, first_idx = np.unique(flat, return_index=True)
    first_of = dict(zip(labels_seen.tolist(), first_idx.tolist()))
    order = sorted(range(1, n + 1), key=lambda i: (-areas[i], first_of[i]))
    return [labeled == i for i in order]


def iou(a, b) -> float:
    """Intersection over union; 0.0 when both masks are empty."""
    a = _check_mask(a, "a")
    b = _check_mask(b, "b")
    _check_same_dims(a, b, "iou")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return float(np.count_nonzero(a & b) / union)


def subtract(roi, segment) -> np.ndarray:
    roi = _check_mask(roi, "roi")
    segment = _check_mask(segment, "segment")
    _check_same_dims(roi, segment, "subtract")
    return roi & ~segment


def sample_pixel(mask, rng: np.random.Generator) -> tuple:
    """Uniform draw of a true cell; rejects an empty mask."""
    m = _check_mask(mask)
    flat = np.flatnonzero(m)
    if flat.size == 0:
        raise ValueError("sample_pixel: mask is empty")
    pick = int(flat[int(rng.integers(flat.size))])
    return pick // m.shape[1], pick % m.shape[1]


@dataclass(frozen=True)
class SegmentMeta:
    """Per-segment annotation: source category plus split bookkeeping."""

    category_id: int
    isthing: bool
    familiar: bool
    category_name: str = ""


# Placeholder metadata for segments produced by inference, where no
# ground-truth category exists.
UNLABELED_META = SegmentMeta(category_id=0, isthing=False, familiar=False)


class LabelMap:
    """Dense segment-id grid with one metadata record per nonzero id."""

    def __init__(self, ids: np.ndarray, segments: dict):
        ids = np.asarray(ids)
        if ids.ndim != 2:
            raise ValueError(f"label grid must be 2-d, got shape {ids.shape}")
        if ids.dtype.kind not in "iu":
            raise ValueError(f"label grid must be integer, got {ids.dtype}")
        if ids.min(initial=0) < 0:
            raise ValueError("label grid has negative ids")
        present = set(np.unique(ids).tolist()) - {0}
        recorded = set(segments.keys())
        if 0 in recorded:
            raise ValueError("id 0 is reserved for unassigned cells")
        if present != recorded:
            raise ValueError(
                f"grid ids and segment records disagree: "
                f"grid-only={sorted(present - recorded)}, "
                f"record-only={sorted(recorded - present)}"
            )
        self.ids = ids.astype(np.int32, copy=False)
        self.segments = dict(segments)

    @classmethod
    def empty(cls, height: int, width: int) -> "LabelMap":
        return cls(np.zeros((height, width), dtype=np.int32), {})

    @property
    def shape(self):
        return self.ids.shape

    def segment_ids(self) -> list:
        return sorted(self.segments.keys())

    def mask_of(self, segment_id: int) -> np.ndarray:
        if segment_id not in self.segments:
            raise KeyError(f"no segment with id {segment_id}")
        return self.ids == segment_id

    def areas(self) -> dict:
        counts = np.bincount(self.ids.ravel())
        return {sid: int(counts[sid]) for sid in self.segments}

    def add_segment(self, mask, meta: SegmentMeta) -> int:
        """Assign the next free id to the mask; rejects overlap or empty."""
        m = _check_mask(mask)
        _check_same_dims(m, self.ids, "add_segment")
        if not m.any():
            raise ValueError("add_segment: empty mask")
        if (self.ids[m] != 0).any():
            raise ValueError("add_segment: mask overlaps an existing segment")
        new_id = max(self.segments.keys(), default=0) + 1
        self.ids[m] = new_id
        self.segments[new_id] = meta
        return new_id


def coverage(labels: LabelMap) -> float:
    """Fraction of cells assigned to some segment."""
    return float(np.count_nonzero(labels.ids) / labels.ids.size)
