"""Numba-jitted conv kernels.

Layout notes: the jitted loops keep the innermost axis over output
channels, so every tap update is a contiguous vector op over the
channel row.  Weights are transposed once per call to channels-last
and activations run through an NHWC intermediate; the public functions
accept and return NCHW like the numpy build.  cache=True persists the
compiled artifacts next to this file.  No explicit signatures: lazy
typing lets the same kernels serve float32 training and float64
gradient checks.

On desk-scale shapes the BLAS-backed numpy build is the faster of the
two (see benchmarks/bench_backends.py); this build exists for
environments where threading or BLAS quality is the bottleneck and as
an independent implementation the agreement tests lean on.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _fwd_nhwc(xt, wt, b, stride, pad, oh, ow):
    n, h, w, c = xt.shape
    kh, kw, k = wt.shape[1], wt.shape[2], wt.shape[3]
    y = np.empty((n, oh, ow, k), dtype=xt.dtype)
    for ni in range(n):
        for oi in range(oh):
            for oj in range(ow):
                yrow = y[ni, oi, oj]
                for kk in range(k):
                    yrow[kk] = b[kk]
                for ii in range(kh):
                    ih = oi * stride + ii - pad
                    if ih < 0 or ih >= h:
                        continue
                    for jj in range(kw):
                        iw = oj * stride + jj - pad
                        if iw < 0 or iw >= w:
                            continue
                        xcell = xt[ni, ih, iw]
                        for ci in range(c):
                            xv = xcell[ci]
                            wrow = wt[ci, ii, jj]
                            for kk in range(k):
                                yrow[kk] += xv * wrow[kk]
    return y


@njit(cache=True)
def _bwd_input_nhwc(gyt, wt2, stride, pad, in_h, in_w):
    # Scatter form: walk output cells like the forward pass and push each
    # gradient row back through the kernel window.  Single-threaded, so
    # the += into gx is race-free.  wt2 layout is (kh, kw, k, c): the
    # innermost update then runs over contiguous channel rows.
    n, oh, ow, k = gyt.shape
    kh, kw, c = wt2.shape[0], wt2.shape[1], wt2.shape[3]
    gx = np.zeros((n, in_h, in_w, c), dtype=gyt.dtype)
    for ni in range(n):
        for oi in range(oh):
            for oj in range(ow):
                grow = gyt[ni, oi, oj]
                for ii in range(kh):
                    ih = oi * stride + ii - pad
                    if ih < 0 or ih >= in_h:
                        continue
                    for jj in range(kw):
                        iw = oj * stride + jj - pad
                        if iw < 0 or iw >= in_w:
                            continue
                        gcell = gx[ni, ih, iw]
                        for kk in range(k):
                            g = grow[kk]
                            wrow = wt2[ii, jj, kk]
                            for ci in range(c):
                                gcell[ci] += g * wrow[ci]
    return gx


@njit(cache=True)
def _bwd_weight_nhwc(gyt, xt, stride, pad, kh, kw):
    n, oh, ow, k = gyt.shape
    h, w, c = xt.shape[1], xt.shape[2], xt.shape[3]
    gwt = np.zeros((c, kh, kw, k), dtype=gyt.dtype)
    for ni in range(n):
        for oi in range(oh):
            for oj in range(ow):
                grow = gyt[ni, oi, oj]
                for ii in range(kh):
                    ih = oi * stride + ii - pad
                    if ih < 0 or ih >= h:
                        continue
                    for jj in range(kw):
                        iw = oj * stride + jj - pad
                        if iw < 0 or iw >= w:
                            continue
                        xcell = xt[ni, ih, iw]
                        for ci in range(c):
                            xv = xcell[ci]
                            gw_row = gwt[ci, ii, jj]
                            for kk in range(k):
                                gw_row[kk] += xv * grow[kk]
    return gwt


def _out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def conv2d_forward(x, w, b, stride, pad):
    k, c, kh, kw = w.shape
    oh = _out_size(x.shape[2], kh, stride, pad)
    ow = _out_size(x.shape[3], kw, stride, pad)
    xt = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
    wt = np.ascontiguousarray(w.transpose(1, 2, 3, 0))
    y = _fwd_nhwc(xt, wt, np.ascontiguousarray(b), stride, pad, oh, ow)
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2))


def conv2d_backward_input(gy, w, stride, pad, in_h, in_w):
    gyt = np.ascontiguousarray(gy.transpose(0, 2, 3, 1))
    wt2 = np.ascontiguousarray(w.transpose(2, 3, 0, 1))
    gx = _bwd_input_nhwc(gyt, wt2, stride, pad, in_h, in_w)
    return np.ascontiguousarray(gx.transpose(0, 3, 1, 2))


def conv2d_backward_weight(gy, x, stride, pad, kh, kw):
    gyt = np.ascontiguousarray(gy.transpose(0, 2, 3, 1))
    xt = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
    gwt = _bwd_weight_nhwc(gyt, xt, stride, pad, kh, kw)
    return np.ascontiguousarray(gwt.transpose(3, 0, 1, 2))
