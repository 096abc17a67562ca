"""Pure-numpy conv kernels (im2col + BLAS matmul).

Fallback path for machines without numba; also the reference the numba
build is checked against.  All functions take NCHW inputs and are
deterministic for fixed inputs.
"""

import numpy as np


def _out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def _im2col(x, kh, kw, stride, pad):
    n, c, h, w = x.shape
    oh = _out_size(h, kh, stride, pad)
    ow = _out_size(w, kw, stride, pad)
    if pad:
        xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
        xp[:, :, pad:pad + h, pad:pad + w] = x
    else:
        xp = x
    cols = np.empty((n, c, kh, kw, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + stride * oh:stride,
                                  j:j + stride * ow:stride]
    return cols.reshape(n, c * kh * kw, oh * ow), oh, ow


def _col2im(gcols, x_shape, kh, kw, stride, pad, oh, ow):
    n, c, h, w = x_shape
    gxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=gcols.dtype)
    g = gcols.reshape(n, c, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i:i + stride * oh:stride,
                j:j + stride * ow:stride] += g[:, :, i, j]
    if pad:
        return gxp[:, :, pad:pad + h, pad:pad + w].copy()
    return gxp


def conv2d_forward(x, w, b, stride, pad):
    n = x.shape[0]
    k, _, kh, kw = w.shape
    cols, oh, ow = _im2col(x, kh, kw, stride, pad)
    y = np.matmul(w.reshape(k, -1), cols)
    y += b.reshape(1, k, 1)
    return y.reshape(n, k, oh, ow)


def conv2d_backward_input(gy, w, stride, pad, in_h, in_w):
    n, k, oh, ow = gy.shape
    _, c, kh, kw = w.shape
    gcols = np.matmul(w.reshape(k, -1).T, gy.reshape(n, k, oh * ow))
    return _col2im(gcols, (n, c, in_h, in_w), kh, kw, stride, pad, oh, ow)


def conv2d_backward_weight(gy, x, stride, pad, kh, kw):
    n, k, oh, ow = gy.shape
    c = x.shape[1]
    cols, _, _ = _im2col(x, kh, kw, stride, pad)
    gw = np.einsum("nko,nco->kc", gy.reshape(n, k, oh * ow), cols)
    return gw.reshape(k, c, kh, kw)
