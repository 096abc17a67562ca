"""Training sample construction.

One sample = (image, pointer, ROI, target).  The target segment is
drawn with probability proportional to area: thing instances count as
whole units; stuff is drawn per class (weight = the class's labeled
area) and then narrowed to one connected component, again
area-proportionally.  The ROI starts as the full image and loses a
uniformly drawn number of non-target segments; a configurable fraction
of samples keeps the all-ones ROI instead.  By construction
pointer in target, target within roi.
"""

from dataclasses import dataclass

import numpy as np

from .masks import LabelMap, SegmentMeta, connected_components, sample_pixel
from .scenes import Scene


@dataclass
class TrainingSample:
    image: np.ndarray          # (3, H, W) float32
    pointer: tuple             # (row, col)
    roi: np.ndarray            # (H, W) bool
    target: np.ndarray         # (H, W) bool
    meta: SegmentMeta
    roi_full: bool             # all-ones ROI draw
    excluded_count: int        # segments removed from the ROI (0 when roi_full)


def _selection_units(labels: LabelMap, connectivity: int, min_area: int):
    """(weight, thing_mask | stuff components, meta, source ids) per unit."""
    counts = np.bincount(labels.ids.ravel())
    units = []
    stuff_by_class: dict[int, list] = {}
    for sid, meta in sorted(labels.segments.items()):
        if meta.isthing:
            a = int(counts[sid])
            if a >= min_area:
                units.append((a, ("thing", sid), meta))
        else:
            stuff_by_class.setdefault(meta.category_id, []).append(sid)
    for cat_id in sorted(stuff_by_class):
        sids = stuff_by_class[cat_id]
        class_mask = np.isin(labels.ids, sids)
        comps = [c for c in connected_components(class_mask, connectivity)
                 if np.count_nonzero(c) >= min_area]
        if not comps:
            continue
        weight = int(sum(np.count_nonzero(c) for c in comps))
        units.append((weight, ("stuff", comps), labels.segments[sids[0]]))
    return units


def _weighted_pick(weights, rng) -> int:
    total = float(sum(weights))
    r = float(rng.random()) * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if r < acc:
            return i
    return len(weights) - 1


def select_segment(labels: LabelMap, rng, connectivity: int = 4,
                   min_area: int = 4):
    """Area-proportional draw of one target segment; returns (mask, meta)."""
    if not labels.segments:
        raise ValueError("select_segment: label map has no segments")
    units = _selection_units(labels, connectivity, min_area)
    if not units:
        raise ValueError(
            f"select_segment: no segment reaches the minimum area {min_area}"
        )
    idx = _weighted_pick([u[0] for u in units], rng)
    _, payload, meta = units[idx]
    kind, value = payload
    if kind == "thing":
        return labels.mask_of(value), meta
    comps = value
    ci = _weighted_pick([np.count_nonzero(c) for c in comps], rng)
    return comps[ci], meta


def make_roi(labels: LabelMap, target, rng, full_image: bool) -> np.ndarray:
    """All-ones ROI, or one with k ~ U{0..m} non-target segments removed.

    Segments overlapping the target (its source instance or class
    region) are never removal candidates, so target within roi always
    holds.
    """
    target = np.asarray(target, dtype=bool)
    roi = np.ones(labels.shape, dtype=bool)
    if full_image:
        return roi
    source_ids = set(np.unique(labels.ids[target]).tolist()) - {0}
    candidates = [sid for sid in sorted(labels.segments) if sid not in source_ids]
    m = len(candidates)
    k = int(rng.integers(0, m + 1))
    if k:
        picked = rng.permutation(m)[:k]
        for pi in picked:
            roi[labels.ids == candidates[int(pi)]] = False
    return roi


def make_sample(scene: Scene, rng, roi_mode_fraction: float = 0.8,
                connectivity: int = 4, min_segment_area: int = 4) -> TrainingSample:
    """Draw one sample from a scene following the trained-input protocol."""
    target, meta = select_segment(scene.labels, rng, connectivity, min_segment_area)
    pointer = sample_pixel(target, rng)
    full_image = bool(rng.random() >= roi_mode_fraction)
    roi = make_roi(scene.labels, target, rng, full_image=full_image)
    k = len(set(np.unique(scene.labels.ids[~roi]).tolist()) - {0})
    return TrainingSample(
        image=scene.image,
        pointer=pointer,
        roi=roi,
        target=target,
        meta=meta,
        roi_full=full_image,
        excluded_count=k,
    )
