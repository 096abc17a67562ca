"""COCO-panoptic annotation ingestion.

The panoptic format stores one PNG per image whose pixel colors encode
segment ids (id = R + 256*G + 256^2*B, 0 = unlabeled) plus a JSON file
listing segment records and the category table.  This module decodes
that into the same LabelMap + metadata the synthetic generator emits,
renumbering segment ids densely from 1 in annotation order, so real
data and synthetic data flow through identical code downstream.
"""

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .masks import LabelMap, SegmentMeta
from .pngio import save_labelmap_png
from .seeds import rng_for


def rgb2id(rgb: np.ndarray) -> np.ndarray:
    """(..., 3) uint8 color -> integer segment id."""
    rgb = np.asarray(rgb)
    if rgb.shape[-1] != 3:
        raise ValueError(f"expected trailing RGB axis of 3, got {rgb.shape}")
    rgb = rgb.astype(np.int64)
    return rgb[..., 0] + 256 * rgb[..., 1] + 256 * 256 * rgb[..., 2]


def id2rgb(ids: np.ndarray) -> np.ndarray:
    """Integer segment id -> (..., 3) uint8 color; inverse of rgb2id."""
    ids = np.asarray(ids).astype(np.int64)
    if ids.min(initial=0) < 0 or ids.max(initial=0) > 256 ** 3 - 1:
        raise ValueError("segment id outside the 24-bit encodable range")
    out = np.empty(ids.shape + (3,), dtype=np.uint8)
    out[..., 0] = ids % 256
    out[..., 1] = (ids // 256) % 256
    out[..., 2] = ids // (256 * 256)
    return out


@dataclass(frozen=True)
class CategoryInfo:
    name: str
    isthing: bool
    familiar: bool = True


class CategoryTable:
    """category id -> CategoryInfo with a familiar/unfamiliar partition."""

    def __init__(self, entries: dict):
        self._entries = dict(entries)

    @classmethod
    def from_coco(cls, categories: list) -> "CategoryTable":
        entries = {}
        for cat in categories:
            entries[int(cat["id"])] = CategoryInfo(
                name=cat.get("name", str(cat["id"])),
                isthing=bool(cat.get("isthing", 1)),
                familiar=True,
            )
        return cls(entries)

    def __getitem__(self, cat_id: int) -> CategoryInfo:
        return self._entries[cat_id]

    def __contains__(self, cat_id: int) -> bool:
        return cat_id in self._entries

    def __len__(self):
        return len(self._entries)

    def ids(self) -> list:
        return sorted(self._entries.keys())

    def unfamiliar_ids(self) -> list:
        return [i for i in self.ids() if not self._entries[i].familiar]


def split_categories(table: CategoryTable, holdout_fraction: float,
                     seed: int) -> CategoryTable:
    """Mark round(fraction * N) categories unfamiliar by a seeded draw."""
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError(
            f"holdout fraction must lie strictly in (0, 1), got {holdout_fraction}"
        )
    ids = table.ids()
    n_hold = int(round(holdout_fraction * len(ids)))
    rng = rng_for(seed, "category-split")
    held = set(np.array(ids)[rng.permutation(len(ids))[:n_hold]].tolist())
    entries = {}
    for cid in ids:
        info = table[cid]
        entries[cid] = CategoryInfo(
            name=info.name, isthing=info.isthing, familiar=cid not in held
        )
    return CategoryTable(entries)


@dataclass
class PanopticAnnotation:
    image_id: int
    file_name: str
    segments: list  # of dicts with id / category_id / area / bbox


@dataclass
class DecodedPanoptic:
    labels: LabelMap
    raw_ids: dict  # dense id -> raw 24-bit id
    annotation: PanopticAnnotation


def load_panoptic_json(path):
    """Read a panoptic JSON file -> (annotations, CategoryTable)."""
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    table = CategoryTable.from_coco(doc.get("categories", []))
    annotations = [
        PanopticAnnotation(
            image_id=int(a["image_id"]),
            file_name=a["file_name"],
            segments=list(a["segments_info"]),
        )
        for a in doc.get("annotations", [])
    ]
    return annotations, table


def decode_panoptic_png(rgb: np.ndarray, annotation: PanopticAnnotation,
                        table: CategoryTable) -> DecodedPanoptic:
    """Color-coded id image + segment records -> densely numbered LabelMap."""
    raw = rgb2id(rgb)
    declared = {}
    for seg in annotation.segments:
        sid = int(seg["id"])
        if sid <= 0:
            raise ValueError(f"annotation {annotation.image_id}: segment id {sid} <= 0")
        if sid in declared:
            raise ValueError(
                f"annotation {annotation.image_id}: duplicate segment id {sid}"
            )
        declared[sid] = seg

    present = set(np.unique(raw).tolist()) - {0}
    undeclared = present - set(declared)
    if undeclared:
        bad = sorted(undeclared)[0]
        pos = np.argwhere(raw == bad)[0]
        raise ValueError(
            f"decoded id {bad} at pixel (row {pos[0]}, col {pos[1]}) is missing "
            f"from the annotation's segment list"
        )

    ids = np.zeros(raw.shape, dtype=np.int32)
    segments = {}
    raw_ids = {}
    dense = 0
    for sid, seg in declared.items():  # annotation order
        mask = raw == sid
        if not mask.any():
            continue
        dense += 1
        ids[mask] = dense
        cat_id = int(seg["category_id"])
        if cat_id not in table:
            raise ValueError(f"segment {sid} references unknown category {cat_id}")
        info = table[cat_id]
        segments[dense] = SegmentMeta(
            category_id=cat_id,
            isthing=info.isthing,
            familiar=info.familiar,
            category_name=info.name,
        )
        raw_ids[dense] = sid
    return DecodedPanoptic(
        labels=LabelMap(ids, segments), raw_ids=raw_ids, annotation=annotation
    )


def encode_panoptic_png(decoded: DecodedPanoptic) -> np.ndarray:
    """Rebuild the original color-coded pixels from a decoded LabelMap."""
    raw = np.zeros(decoded.labels.shape, dtype=np.int64)
    for dense, sid in decoded.raw_ids.items():
        raw[decoded.labels.ids == dense] = sid
    return id2rgb(raw)


def read_panoptic_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def convert_to_dataset(json_path, png_dir, out_dir) -> int:
    """Convert a panoptic JSON + PNG directory into the repo's layout.

    Writes annotations/<stem>.png (16-bit ids) + .json sidecars; returns
    the number of images converted.
    """
    annotations, table = load_panoptic_json(json_path)
    ann_dir = os.path.join(out_dir, "annotations")
    os.makedirs(ann_dir, exist_ok=True)
    for ann in annotations:
        rgb = read_panoptic_png(os.path.join(png_dir, ann.file_name))
        decoded = decode_panoptic_png(rgb, ann, table)
        stem, _ = os.path.splitext(os.path.basename(ann.file_name))
        save_labelmap_png(os.path.join(ann_dir, stem + ".png"), decoded.labels)
    return len(annotations)
