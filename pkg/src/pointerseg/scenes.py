"""Synthetic panoptic scene generator.

Scenes are flat-shaded shapes ("things") painted back to front over a
background partitioned into textured bands ("stuff").  Every pixel ends
up labeled.  Generation is a pure function of (config.seed, index), so
streams are reproducible and order-independent.

Class holdout: a configurable subset of class names is marked
unfamiliar.  Streams built with emit_unfamiliar=False never draw those
classes; evaluation streams draw everything and tag each segment, which
is what makes the familiar/unfamiliar comparison possible downstream.

Band cuts are cyclic (an interval may wrap from the bottom edge back to
the top) and band textures tile, so cyclically shifted scenes look like
ordinary samples from the same distribution; with wrap_things=True the
shapes are rasterized in wrapped coordinates too and whole scenes
become fully toroidal.  That variant exists for shift-consistency
checks of the model, not for training.
"""

import math
from collections import OrderedDict
from dataclasses import dataclass, field, replace

import numpy as np

from .masks import LabelMap, SegmentMeta
from .seeds import derive_seed, rng_for

# Registry: name -> (category id, isthing). Ids are stable across runs.
THING_CLASSES = OrderedDict([
    ("ellipse", 1),
    ("rectangle", 2),
    ("triangle", 3),
    ("diamond", 4),
    ("capsule", 5),
    ("pentagon", 6),
    ("ring", 7),
    ("cross", 8),
])
STUFF_CLASSES = OrderedDict([
    ("plain", 9),
    ("hstripes", 10),
    ("vstripes", 11),
    ("gradient", 12),
])
ALL_CLASSES = OrderedDict(list(THING_CLASSES.items()) + list(STUFF_CLASSES.items()))

DEFAULT_HOLDOUT = frozenset({"ring", "cross", "gradient"})

_COLOR_ANCHORS = {
    "ellipse": (0.85, 0.25, 0.25),
    "rectangle": (0.25, 0.45, 0.85),
    "triangle": (0.95, 0.75, 0.20),
    "diamond": (0.60, 0.30, 0.75),
    "capsule": (0.90, 0.50, 0.15),
    "pentagon": (0.30, 0.80, 0.80),
    "ring": (0.85, 0.40, 0.60),
    "cross": (0.50, 0.75, 0.30),
    "plain": (0.45, 0.55, 0.45),
    "hstripes": (0.35, 0.35, 0.50),
    "vstripes": (0.55, 0.45, 0.35),
    "gradient": (0.40, 0.50, 0.60),
}


@dataclass(frozen=True)
class SceneConfig:
    height: int = 64
    width: int = 64
    thing_classes: tuple = tuple(THING_CLASSES)
    stuff_classes: tuple = tuple(STUFF_CLASSES)
    holdout: frozenset = DEFAULT_HOLDOUT
    things_range: tuple = (2, 6)
    bands_range: tuple = (1, 3)
    noise: float = 0.02
    color_jitter: float = 0.08
    emit_unfamiliar: bool = True
    wrap_things: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.height < 32 or self.width < 32:
            raise ValueError("scene size must be at least 32x32")
        unknown = (set(self.thing_classes) - set(THING_CLASSES)) | (
            set(self.stuff_classes) - set(STUFF_CLASSES)
        )
        if unknown:
            raise ValueError(f"unknown class names: {sorted(unknown)}")
        stray = set(self.holdout) - set(self.thing_classes) - set(self.stuff_classes)
        if stray:
            raise ValueError(f"holdout names outside the class lists: {sorted(stray)}")

    def familiar_classes(self) -> set:
        return (set(self.thing_classes) | set(self.stuff_classes)) - set(self.holdout)

    def active_things(self) -> list:
        if self.emit_unfamiliar:
            return list(self.thing_classes)
        return [c for c in self.thing_classes if c not in self.holdout]

    def active_stuff(self) -> list:
        if self.emit_unfamiliar:
            return list(self.stuff_classes)
        return [c for c in self.stuff_classes if c not in self.holdout]


@dataclass
class Scene:
    image: np.ndarray  # (3, H, W) float32 in [0, 1]
    labels: LabelMap
    index: int


def _offsets(h, w, cy, cx, wrap: bool):
    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    if wrap:
        dy = (ys - cy + h / 2.0) % h - h / 2.0
        dx = (xs - cx + w / 2.0) % w - w / 2.0
    else:
        dy = ys - cy
        dx = xs - cx
    return dy[:, None], dx[None, :]


def _polygon_mask(u, v, verts):
    inside = np.ones(np.broadcast_shapes(u.shape, v.shape), dtype=bool)
    n = len(verts)
    # Counterclockwise winding; inside where every edge cross-product >= 0.
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        inside &= (x1 - x0) * (v - y0) - (y1 - y0) * (u - x0) >= 0
    return inside


def _regular_verts(n: int, start_deg: float):
    angles = [math.radians(start_deg + k * 360.0 / n) for k in range(n)]
    return [(math.cos(a), math.sin(a)) for a in angles]


_TRIANGLE_VERTS = _regular_verts(3, 90.0)
_PENTAGON_VERTS = _regular_verts(5, 90.0)


def _shape_mask(name, dy, dx, a, b, theta, extra):
    c, s = math.cos(theta), math.sin(theta)
    u = dx * c + dy * s
    v = -dx * s + dy * c
    if name == "ellipse":
        return (u / a) ** 2 + (v / b) ** 2 <= 1.0
    if name == "rectangle":
        return (np.abs(u) <= a) & (np.abs(v) <= b)
    if name == "triangle":
        return _polygon_mask(u / a, v / b, _TRIANGLE_VERTS)
    if name == "diamond":
        return np.abs(u) / a + np.abs(v) / b <= 1.0
    if name == "capsule":
        half = a - b
        t = np.clip(u, -half, half)
        return (u - t) ** 2 + v ** 2 <= b ** 2
    if name == "pentagon":
        return _polygon_mask(u / a, v / b, _PENTAGON_VERTS)
    if name == "ring":
        rr = (u / a) ** 2 + (v / b) ** 2
        return (rr <= 1.0) & (rr >= extra ** 2)
    if name == "cross":
        return ((np.abs(u) <= a) & (np.abs(v) <= b * extra)) | (
            (np.abs(u) <= a * extra) & (np.abs(v) <= b)
        )
    raise ValueError(f"unknown thing class: {name}")


def _draw_thing_geometry(name, rng):
    """Size/rotation/auxiliary draws for one shape instance."""
    a = float(rng.uniform(4.5, 12.0))
    b = float(rng.uniform(4.5, 12.0))
    extra = 0.0
    if name == "capsule":
        a = float(rng.uniform(6.0, 12.0))
        b = float(rng.uniform(2.5, 0.55 * a))
    elif name == "ring":
        extra = float(rng.uniform(0.45, 0.65))
    elif name == "cross":
        extra = float(rng.uniform(0.30, 0.45))
    theta = float(rng.uniform(0.0, math.pi))
    return a, b, theta, extra


def _stuff_shade(name, h, w, rng):
    """Multiplicative brightness field for one stuff class; tiles cyclically."""
    if name == "plain":
        return np.ones((h, w))
    if name == "hstripes" or name == "vstripes":
        size = h if name == "hstripes" else w
        sw = int(rng.choice([2, 4, 8]))
        phase = int(rng.integers(0, 2 * sw))
        coord = np.arange(size)
        stripe = np.where(((coord + phase) // sw) % 2 == 0, 1.0 + 0.18, 1.0 - 0.18)
        return np.tile(stripe[:, None], (1, w)) if name == "hstripes" else np.tile(
            stripe[None, :], (h, 1)
        )
    if name == "gradient":
        axis = int(rng.integers(2))
        freq = int(rng.integers(1, 3))
        phase = float(rng.uniform(0.0, 2.0 * math.pi))
        size = h if axis == 0 else w
        coord = np.arange(size)
        wave = 1.0 + 0.25 * np.sin(2.0 * math.pi * freq * coord / size + phase)
        return np.tile(wave[:, None], (1, w)) if axis == 0 else np.tile(
            wave[None, :], (h, 1)
        )
    raise ValueError(f"unknown stuff class: {name}")


def _jitter_color(name, rng, amount):
    anchor = np.array(_COLOR_ANCHORS[name])
    color = anchor + rng.uniform(-amount, amount, size=3)
    return np.clip(color, 0.05, 0.95)


def generate_scene(config: SceneConfig, index: int) -> Scene:
    """Deterministically build scene number `index` of the stream."""
    things_avail = config.active_things()
    stuff_avail = config.active_stuff()
    if not stuff_avail:
        raise ValueError("no stuff classes available to fill the background")
    h, w = config.height, config.width
    rng = rng_for(config.seed, "scene", index)

    # Background bands: cyclic intervals along one axis, one class each.
    # Cut positions are distinct, so the intervals partition the axis.
    axis = int(rng.integers(2))
    n_bands = int(rng.integers(config.bands_range[0], config.bands_range[1] + 1))
    size = h if axis == 0 else w
    if n_bands == 1:
        starts = np.array([0])
    else:
        starts = np.sort(rng.choice(size, n_bands, replace=False))
    band_classes = [stuff_avail[int(i)] for i in rng.integers(0, len(stuff_avail), n_bands)]

    coord = np.arange(size)
    class_of_coord = np.empty(size, dtype=object)
    for bi in range(n_bands):
        lo = int(starts[bi])
        hi = int(starts[(bi + 1) % n_bands]) if n_bands > 1 else lo + size
        if hi <= lo:
            hi += size
        span = ((coord >= lo) & (coord < hi)) | ((coord + size >= lo) & (coord + size < hi))
        class_of_coord[span] = band_classes[bi]

    image = np.zeros((3, h, w), dtype=np.float64)
    ids = np.zeros((h, w), dtype=np.int32)
    temp_meta: dict[int, SegmentMeta] = {}
    familiar_set = config.familiar_classes()

    present_stuff = [c for c in STUFF_CLASSES if c in set(band_classes)]
    for cname in present_stuff:
        col = class_of_coord == cname
        if axis == 0:
            region = np.repeat(col[:, None], w, axis=1)
        else:
            region = np.repeat(col[None, :], h, axis=0)
        color = _jitter_color(cname, rng, config.color_jitter)
        shade = _stuff_shade(cname, h, w, rng)
        image[:, region] = color[:, None] * shade[region][None, :]
        cid = STUFF_CLASSES[cname]
        ids[region] = cid
        temp_meta[cid] = SegmentMeta(
            category_id=cid,
            isthing=False,
            familiar=cname in familiar_set,
            category_name=cname,
        )

    # Things, back to front: each paint overwrites whatever lies beneath.
    n_things = int(rng.integers(config.things_range[0], config.things_range[1] + 1))
    thing_temp_base = 100
    for ti in range(n_things):
        if not things_avail:
            break
        cname = things_avail[int(rng.integers(len(things_avail)))]
        a, b, theta, extra = _draw_thing_geometry(cname, rng)
        reach = max(a, b)
        if config.wrap_things:
            cy = float(rng.uniform(0, h))
            cx = float(rng.uniform(0, w))
        else:
            margin = reach + 1.0
            cy = float(rng.uniform(margin, h - 1 - margin))
            cx = float(rng.uniform(margin, w - 1 - margin))
        color = _jitter_color(cname, rng, config.color_jitter)
        dy, dx = _offsets(h, w, cy, cx, config.wrap_things)
        mask = _shape_mask(cname, dy, dx, a, b, theta, extra)
        if not mask.any():
            continue
        image[:, mask] = color[:, None]
        tid = thing_temp_base + ti
        ids[mask] = tid
        temp_meta[tid] = SegmentMeta(
            category_id=THING_CLASSES[cname],
            isthing=True,
            familiar=cname in familiar_set,
            category_name=cname,
        )

    noise = rng.normal(0.0, config.noise, size=(3, h, w))
    image = np.clip(image + noise, 0.0, 1.0).astype(np.float32)

    # Occlusion can erase segments entirely; renumber the survivors densely.
    dense = np.zeros((h, w), dtype=np.int32)
    segments: dict[int, SegmentMeta] = {}
    next_id = 1
    for tid in sorted(temp_meta):
        mask = ids == tid
        if not mask.any():
            continue
        dense[mask] = next_id
        segments[next_id] = temp_meta[tid]
        next_id += 1

    return Scene(image=image, labels=LabelMap(dense, segments), index=index)


class SceneStream:
    """Lazy indexed scene sequence with a bounded generation cache."""

    def __init__(self, config: SceneConfig, count: int, cache_size: int = 512):
        if count < 1:
            raise ValueError("stream needs at least one scene")
        self.config = config
        self.count = count
        self._cache: OrderedDict[int, Scene] = OrderedDict()
        self._cache_size = cache_size

    def __len__(self):
        return self.count

    def __getitem__(self, index: int) -> Scene:
        if not 0 <= index < self.count:
            raise IndexError(index)
        hit = self._cache.get(index)
        if hit is not None:
            self._cache.move_to_end(index)
            return hit
        scene = generate_scene(self.config, index)
        self._cache[index] = scene
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return scene

    def __iter__(self):
        return (self[i] for i in range(self.count))


def build_split(config: SceneConfig, n_train: int, n_eval: int):
    """Training stream (familiar classes only) + tagged eval stream."""
    if n_train < 1 or n_eval < 1:
        raise ValueError("both splits need at least one scene")
    if not config.holdout:
        raise ValueError("holdout set is empty; nothing would count as unfamiliar")
    train_cfg = replace(
        config, emit_unfamiliar=False, seed=derive_seed(config.seed, "train-scenes")
    )
    eval_cfg = replace(
        config, emit_unfamiliar=True, seed=derive_seed(config.seed, "eval-scenes")
    )
    return SceneStream(train_cfg, n_train), SceneStream(eval_cfg, n_eval)
