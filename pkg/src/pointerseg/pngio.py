"""PNG round-trips for images, masks, and label maps.

Conventions: RGB images are float arrays of shape (3, H, W) in [0,1]
stored as 8-bit PNG; binary masks are 8-bit grayscale (0 or 255);
label maps are 16-bit grayscale holding segment ids, with the segment
metadata in a JSON sidecar next to the PNG.
"""

import json
import os

import numpy as np
from PIL import Image

from .masks import LabelMap, SegmentMeta


def save_image_png(path, image: np.ndarray) -> None:
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"image must be (3, H, W), got {image.shape}")
    arr = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(path)


def load_image_png(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return (arr / 255.0).transpose(2, 0, 1)


def save_mask_png(path, mask: np.ndarray) -> None:
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def load_mask_png(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return arr >= 128


def _sidecar_path(png_path) -> str:
    stem, _ = os.path.splitext(os.fspath(png_path))
    return stem + ".json"


def save_labelmap_png(path, labels: LabelMap) -> None:
    if labels.ids.max(initial=0) > 0xFFFF:
        raise ValueError("label map has ids beyond 16-bit range")
    arr = labels.ids.astype(np.uint16)
    # uint16 arrays map to Pillow's native 16-bit grayscale mode
    Image.fromarray(arr).save(path)
    records = [
        {
            "id": sid,
            "category_id": meta.category_id,
            "isthing": meta.isthing,
            "familiar": meta.familiar,
            "category_name": meta.category_name,
        }
        for sid, meta in sorted(labels.segments.items())
    ]
    with open(_sidecar_path(path), "w", encoding="utf-8") as f:
        json.dump({"segments": records}, f, indent=1)


def load_labelmap_png(path) -> LabelMap:
    with Image.open(path) as im:
        arr = np.asarray(im, dtype=np.int32)
    with open(_sidecar_path(path), encoding="utf-8") as f:
        doc = json.load(f)
    segments = {
        rec["id"]: SegmentMeta(
            category_id=rec["category_id"],
            isthing=rec["isthing"],
            familiar=rec["familiar"],
            category_name=rec.get("category_name", ""),
        )
        for rec in doc["segments"]
    }
    return LabelMap(arr, segments)
