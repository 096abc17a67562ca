"""Pointer-conditioned segmentation net.

Pipeline: the image goes through one stem conv; the one-hot pointer map
goes through a single conv of identical geometry and multiplies the
stem activations cell by cell; the ROI map goes through its own conv
and is added on top.  The merged map runs through three downsampling
residual blocks, a pooled-context stage over {1,2,4,8} grids, three
upsample+conv stages back to full resolution, and a 1-channel head of
per-pixel logits.

Merge initialization: the pointer conv starts with zero weights and
unit bias (its output is all ones, an identity multiplier) and the ROI
conv starts all zero (an additive no-op).  A fresh net therefore
produces bit-identical logits under any pointer or ROI change; both
pathways only matter once training moves them.
"""

import json
import os
from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import expit

from . import ops
from .masks import _check_mask
from .seeds import rng_for
from .serialize import save_params, load_params
from .tensor import Tensor, Parameter, ParameterCollection


@dataclass(frozen=True)
class ArchConfig:
    stem_channels: int = 16
    encoder_channels: tuple = (32, 64, 64)
    encoder_strides: tuple = (2, 2, 2)
    psp_grids: tuple = (1, 2, 4, 8)
    psp_branch_channels: int = 16
    decoder_channels: tuple = (32, 16, 8)
    threshold: float = 0.5

    def total_stride(self) -> int:
        return int(np.prod(self.encoder_strides))

    def size_multiple(self) -> int:
        return self.total_stride() * max(self.psp_grids)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "ArchConfig":
        doc = dict(doc)
        for key in ("encoder_channels", "encoder_strides", "psp_grids",
                    "decoder_channels"):
            doc[key] = tuple(doc[key])
        return cls(**doc)


class _Conv:
    def __init__(self, coll, name, in_c, out_c, k, stride, pad, rng,
                 init: str = "he"):
        if init == "he":
            std = np.sqrt(2.0 / (in_c * k * k))
            w = rng.standard_normal((out_c, in_c, k, k)) * std
            b = np.zeros(out_c)
        elif init == "zero":
            w = np.zeros((out_c, in_c, k, k))
            b = np.zeros(out_c)
        elif init == "zero_w_unit_b":
            w = np.zeros((out_c, in_c, k, k))
            b = np.ones(out_c)
        else:
            raise ValueError(f"unknown init {init!r}")
        self.w = coll.add(Parameter(f"{name}.w", w.astype(np.float32)))
        self.b = coll.add(Parameter(f"{name}.b", b.astype(np.float32)))
        self.stride = stride
        self.pad = pad

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.w, self.b, self.stride, self.pad)


class _ResBlock:
    def __init__(self, coll, name, in_c, out_c, stride, rng):
        self.conv1 = _Conv(coll, f"{name}.conv1", in_c, out_c, 3, stride, 1, rng)
        self.conv2 = _Conv(coll, f"{name}.conv2", out_c, out_c, 3, 1, 1, rng)
        self.skip = _Conv(coll, f"{name}.skip", in_c, out_c, 1, stride, 0, rng)

    def __call__(self, x: Tensor) -> Tensor:
        y = self.conv2(ops.relu(self.conv1(x)))
        return ops.relu(ops.add(y, self.skip(x)))


def encode_pointer_map(pointer, height: int, width: int) -> Tensor:
    """One-hot (1, H, W) map with a single 1 at the pointer cell."""
    row, col = int(pointer[0]), int(pointer[1])
    if not (0 <= row < height and 0 <= col < width):
        raise ValueError(
            f"pointer ({row}, {col}) outside image bounds {height}x{width}"
        )
    m = np.zeros((1, height, width), dtype=np.float32)
    m[0, row, col] = 1.0
    return Tensor(m)


def encode_roi_map(roi) -> Tensor:
    """Binary mask cast to a float (1, H, W) map."""
    m = _check_mask(roi, "roi")
    return Tensor(m.astype(np.float32)[None])


class PointerSegNet:
    def __init__(self, arch: ArchConfig = ArchConfig(), seed: int = 0):
        self.arch = arch
        self.params = ParameterCollection()
        rng = rng_for(seed, "init")
        coll = self.params

        self.stem = _Conv(coll, "stem", 3, arch.stem_channels, 3, 1, 1, rng)
        self.pointer_conv = _Conv(coll, "pointer", 1, arch.stem_channels, 3, 1, 1,
                                  rng, init="zero_w_unit_b")
        self.roi_conv = _Conv(coll, "roi", 1, arch.stem_channels, 3, 1, 1,
                              rng, init="zero")

        self.encoder = []
        in_c = arch.stem_channels
        for i, (out_c, stride) in enumerate(
            zip(arch.encoder_channels, arch.encoder_strides)
        ):
            self.encoder.append(_ResBlock(coll, f"enc{i}", in_c, out_c, stride, rng))
            in_c = out_c

        self.psp_branches = []
        for g in arch.psp_grids:
            self.psp_branches.append(
                (g, _Conv(coll, f"psp.g{g}", in_c, arch.psp_branch_channels,
                          1, 1, 0, rng))
            )
        fused_in = in_c + len(arch.psp_grids) * arch.psp_branch_channels
        self.psp_fuse = _Conv(coll, "psp.fuse", fused_in, in_c, 3, 1, 1, rng)

        self.decoder = []
        for i, out_c in enumerate(arch.decoder_channels):
            self.decoder.append(_Conv(coll, f"dec{i}", in_c, out_c, 3, 1, 1, rng))
            in_c = out_c
        self.head = _Conv(coll, "head", in_c, 1, 1, 1, 0, rng)

    def _check_spatial(self, height: int, width: int) -> None:
        mult = self.arch.size_multiple()
        if height % mult or width % mult:
            raise ValueError(
                f"spatial size {height}x{width} must be a multiple of {mult} "
                f"(encoder stride x largest pooling grid)"
            )

    def forward(self, image: np.ndarray, pointer, roi) -> Tensor:
        """Logits (1, H, W) for the segment under the pointer.

        image: (3, H, W) floats in [0,1]; pointer: (row, col) inside
        the ROI; roi: (H, W) bool mask fed to the net's ROI pathway.
        """
        image = np.asarray(image)
        if image.ndim != 3 or image.shape[0] != 3:
            raise ValueError(f"image must be (3, H, W), got {image.shape}")
        h, w = image.shape[1], image.shape[2]
        self._check_spatial(h, w)
        roi = _check_mask(roi, "roi")
        if roi.shape != (h, w):
            raise ValueError(f"roi shape {roi.shape} does not match image {h}x{w}")
        row, col = int(pointer[0]), int(pointer[1])
        pointer_map = encode_pointer_map((row, col), h, w)
        if not roi[row, col]:
            raise ValueError(f"pointer ({row}, {col}) lies outside the ROI")
        roi_map = encode_roi_map(roi)

        x = Tensor((image.astype(np.float32) - 0.5)[None])
        attn = self.pointer_conv(ops.reshape(pointer_map, (1, 1, h, w)))
        merged = ops.mul(self.stem(x), attn)
        roi_attn = self.roi_conv(ops.reshape(roi_map, (1, 1, h, w)))
        y = ops.add(merged, roi_attn)

        for block in self.encoder:
            y = block(y)

        fh, fw = y.shape[2], y.shape[3]
        branches = [y]
        for g, conv in self.psp_branches:
            pooled = ops.relu(conv(ops.avgpool_grid(y, g)))
            branches.append(ops.repeat_upsample(pooled, fh // g, fw // g))
        y = ops.relu(self.psp_fuse(ops.concat(branches, axis=1)))

        for conv in self.decoder:
            y = ops.relu(conv(ops.upsample2x(y)))
        logits = self.head(y)
        return ops.reshape(logits, (1, h, w))


def predict_mask(logits, roi, threshold: float = 0.5) -> np.ndarray:
    """Binarize logits and clip to the ROI: (sigmoid > threshold) & roi."""
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    data = data.reshape(data.shape[-2], data.shape[-1])
    roi = _check_mask(roi, "roi")
    if data.shape != roi.shape:
        raise ValueError(f"logits {data.shape} vs roi {roi.shape}")
    return (expit(data) > threshold) & roi


def save_checkpoint(path, net: PointerSegNet) -> None:
    """Write parameters plus a JSON sidecar with the architecture."""
    save_params(path, net.params)
    doc = {"format": "pointerseg-checkpoint-v1", "arch": net.arch.to_json()}
    with open(_sidecar(path), "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1)


def load_checkpoint(path) -> PointerSegNet:
    with open(_sidecar(path), encoding="utf-8") as f:
        doc = json.load(f)
    arch = ArchConfig.from_json(doc["arch"])
    net = PointerSegNet(arch)
    loaded = load_params(path)
    if set(loaded.names()) != set(net.params.names()):
        missing = set(net.params.names()) - set(loaded.names())
        extra = set(loaded.names()) - set(net.params.names())
        raise ValueError(
            f"checkpoint does not match architecture: missing={sorted(missing)}, "
            f"unexpected={sorted(extra)}"
        )
    for p in net.params:
        src = loaded[p.name]
        if src.shape != p.shape:
            raise ValueError(
                f"checkpoint shape mismatch for {p.name}: "
                f"{src.shape} vs expected {p.shape}"
            )
        p.data = src.data
    return net


def _sidecar(path) -> str:
    stem, _ = os.path.splitext(os.fspath(path))
    return stem + ".json"
