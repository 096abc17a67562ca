"""Differentiable ops.

Each op computes its result with numpy (convs go through the selected
kernel backend) and registers a closure that maps the output gradient
to parent gradients.  Shapes are validated here, so the model can
assume clean inputs everywhere downstream.
"""

import numpy as np
from scipy.special import expit

from . import kernels
from .tensor import Tensor, from_op


def _require_same_shape(a: Tensor, b: Tensor, op_name: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op_name}: shape mismatch {a.shape} vs {b.shape}")


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of NCHW input with KCkhkw weights plus bias."""
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError(
            f"conv2d: need 4-d input and weight, got {x.shape} and {w.shape}"
        )
    n, c, h, wd = x.shape
    k, cw, kh, kw = w.shape
    if cw != c:
        raise ValueError(f"conv2d: input has {c} channels, weight expects {cw}")
    if b.shape != (k,):
        raise ValueError(f"conv2d: bias shape {b.shape} does not match {k} filters")
    if kh > h + 2 * padding or kw > wd + 2 * padding:
        raise ValueError(
            f"conv2d: kernel {kh}x{kw} exceeds padded input "
            f"{h + 2 * padding}x{wd + 2 * padding}"
        )
    y = kernels.conv2d_forward(x.data, w.data, b.data, stride, padding)

    def _bwd(gy):
        if x.requires_grad:
            x._accumulate(
                kernels.conv2d_backward_input(gy, w.data, stride, padding, h, wd)
            )
        if w.requires_grad:
            w._accumulate(
                kernels.conv2d_backward_weight(gy, x.data, stride, padding, kh, kw)
            )
        if b.requires_grad:
            b._accumulate(gy.sum(axis=(0, 2, 3)))

    return from_op(y, (x, w, b), _bwd)


def eltwise(a: Tensor, b: Tensor, op: str) -> Tensor:
    """Cell-wise combine of two same-shape tensors; op is "mul" or "add"."""
    _require_same_shape(a, b, f"eltwise {op}")
    if op == "mul":
        def _bwd(gy):
            if a.requires_grad:
                a._accumulate(gy * b.data)
            if b.requires_grad:
                b._accumulate(gy * a.data)
        return from_op(a.data * b.data, (a, b), _bwd)
    if op == "add":
        def _bwd(gy):
            if a.requires_grad:
                a._accumulate(gy)
            if b.requires_grad:
                b._accumulate(gy)
        return from_op(a.data + b.data, (a, b), _bwd)
    raise ValueError(f"eltwise: unknown op {op!r}")


def mul(a: Tensor, b: Tensor) -> Tensor:
    return eltwise(a, b, "mul")


def add(a: Tensor, b: Tensor) -> Tensor:
    return eltwise(a, b, "add")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def _bwd(gy):
        if x.requires_grad:
            x._accumulate(gy * mask)

    return from_op(np.where(mask, x.data, 0), (x,), _bwd)


def _upsample_matrix(size: int, dtype) -> np.ndarray:
    # Bilinear doubling without corner alignment: output cell o samples
    # source coordinate o/2 - 0.25, clamped at the borders.
    u = np.zeros((2 * size, size), dtype=dtype)
    for o in range(2 * size):
        src = o / 2.0 - 0.25
        i0 = int(np.floor(src))
        frac = src - i0
        i0c = min(max(i0, 0), size - 1)
        i1c = min(max(i0 + 1, 0), size - 1)
        u[o, i0c] += 1.0 - frac
        u[o, i1c] += frac
    return u


_UPSAMPLE_CACHE: dict[tuple[int, str], np.ndarray] = {}


def _upsample_matrix_cached(size: int, dtype) -> np.ndarray:
    key = (size, np.dtype(dtype).name)
    m = _UPSAMPLE_CACHE.get(key)
    if m is None:
        m = _upsample_matrix(size, dtype)
        _UPSAMPLE_CACHE[key] = m
    return m


def upsample2x(x: Tensor) -> Tensor:
    """Bilinear doubling of the two trailing dims of an NCHW tensor."""
    if x.data.ndim != 4:
        raise ValueError(f"upsample2x: need 4-d input, got {x.shape}")
    h, w = x.shape[2], x.shape[3]
    uh = _upsample_matrix_cached(h, x.dtype)
    uw = _upsample_matrix_cached(w, x.dtype)
    y = np.matmul(np.matmul(uh, x.data), uw.T)

    def _bwd(gy):
        if x.requires_grad:
            x._accumulate(np.matmul(np.matmul(uh.T, gy), uw))

    return from_op(y, (x,), _bwd)


def avgpool_grid(x: Tensor, grid: int) -> Tensor:
    """Average-pool an NCHW tensor onto a grid x grid output."""
    n, c, h, w = x.shape
    if h % grid or w % grid:
        raise ValueError(f"avgpool_grid: {h}x{w} not divisible into {grid}x{grid} cells")
    ch, cw = h // grid, w // grid
    y = x.data.reshape(n, c, grid, ch, grid, cw).mean(axis=(3, 5))

    def _bwd(gy):
        if x.requires_grad:
            g = np.broadcast_to(
                gy.reshape(n, c, grid, 1, grid, 1) / (ch * cw),
                (n, c, grid, ch, grid, cw),
            )
            x._accumulate(g.reshape(n, c, h, w).copy())

    return from_op(y, (x,), _bwd)


def repeat_upsample(x: Tensor, factor_h: int, factor_w: int) -> Tensor:
    """Nearest-neighbor upsample by integer factors (pyramid branch resize)."""
    n, c, h, w = x.shape
    y = np.repeat(np.repeat(x.data, factor_h, axis=2), factor_w, axis=3)

    def _bwd(gy):
        if x.requires_grad:
            g = gy.reshape(n, c, h, factor_h, w, factor_w).sum(axis=(3, 5))
            x._accumulate(g)

    return from_op(y, (x,), _bwd)


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = list(tensors)
    y = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def _bwd(gy):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * gy.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(gy[tuple(idx)].copy())

    return from_op(y, tensors, _bwd)


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)

    def _bwd(gy):
        if x.requires_grad:
            x._accumulate(gy.reshape(x.shape))

    return from_op(x.data.reshape(shape), (x,), _bwd)


def scale(x: Tensor, alpha: float) -> Tensor:
    def _bwd(gy):
        if x.requires_grad:
            x._accumulate(gy * alpha)

    return from_op(x.data * alpha, (x,), _bwd)


def sum_all(x: Tensor) -> Tensor:
    def _bwd(gy):
        if x.requires_grad:
            x._accumulate(np.full_like(x.data, gy.reshape(())))

    return from_op(x.data.sum(), (x,), _bwd)


def sigmoid_bce(logits: Tensor, target: Tensor) -> Tensor:
    """Mean binary cross-entropy of sigmoid(logits) against a {0,1} target.

    Uses the overflow-free form max(z,0) - z*t + log(1 + exp(-|z|)), so
    saturated logits stay finite.
    """
    _require_same_shape(logits, target, "sigmoid_bce")
    t = target.data
    if not np.isin(t, (0.0, 1.0)).all():
        bad = t[~np.isin(t, (0.0, 1.0))][0]
        raise ValueError(f"sigmoid_bce: target must be 0/1 valued, found {bad}")
    z = logits.data
    per_cell = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
    n = z.size

    def _bwd(gy):
        if logits.requires_grad:
            logits._accumulate((expit(z) - t) * (gy.reshape(()) / n))

    return from_op(per_cell.mean(), (logits, target), _bwd)
