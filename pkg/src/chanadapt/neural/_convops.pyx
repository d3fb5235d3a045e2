# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled 2-D correlation kernels (forward, input-grad, weight-grad).

Stride-1 cases run a flattened row-pitch kernel: the output scratch keeps
the input's row pitch so the (row, col) loops collapse into one long
vectorizable loop with a constant offset, and the kernel row is unrolled in
chunks of five taps.  Strided cases fall back to straightforward loops (they
carry a small share of the arithmetic).  Every parallel task owns a disjoint
output slice and accumulates in a fixed serial order, so results are
bit-identical regardless of thread count.

Padding/flipping preparation happens here in NumPy; the hot loops see
C-contiguous arrays only.
"""

import numpy as np

cimport numpy as cnp
from cython cimport floating
from cython.parallel import prange


def _dtype_of(arr):
    return np.float64 if arr.dtype == np.float64 else np.float32


cdef void _flat_task(floating* bp, floating[:, :, :, ::1] x,
                     floating[:, :, :, ::1] w, Py_ssize_t b, Py_ssize_t co,
                     Py_ssize_t ci_n, Py_ssize_t kh, Py_ssize_t kw,
                     Py_ssize_t nflat) noexcept nogil:
    cdef Py_ssize_t ci, ky, kx, f, rem
    cdef floating w0, w1, w2, w3, w4
    cdef floating* xp
    for ci in range(ci_n):
        for ky in range(kh):
            kx = 0
            while kx + 5 <= kw:
                w0 = w[co, ci, ky, kx]
                w1 = w[co, ci, ky, kx + 1]
                w2 = w[co, ci, ky, kx + 2]
                w3 = w[co, ci, ky, kx + 3]
                w4 = w[co, ci, ky, kx + 4]
                xp = &x[b, ci, ky, kx]
                for f in range(nflat):
                    bp[f] += (w0 * xp[f] + w1 * xp[f + 1] + w2 * xp[f + 2]
                              + w3 * xp[f + 3] + w4 * xp[f + 4])
                kx = kx + 5
            rem = kw - kx
            xp = &x[b, ci, ky, kx]
            if rem == 4:
                w0 = w[co, ci, ky, kx]
                w1 = w[co, ci, ky, kx + 1]
                w2 = w[co, ci, ky, kx + 2]
                w3 = w[co, ci, ky, kx + 3]
                for f in range(nflat):
                    bp[f] += (w0 * xp[f] + w1 * xp[f + 1] + w2 * xp[f + 2]
                              + w3 * xp[f + 3])
            elif rem == 3:
                w0 = w[co, ci, ky, kx]
                w1 = w[co, ci, ky, kx + 1]
                w2 = w[co, ci, ky, kx + 2]
                for f in range(nflat):
                    bp[f] += w0 * xp[f] + w1 * xp[f + 1] + w2 * xp[f + 2]
            elif rem == 2:
                w0 = w[co, ci, ky, kx]
                w1 = w[co, ci, ky, kx + 1]
                for f in range(nflat):
                    bp[f] += w0 * xp[f] + w1 * xp[f + 1]
            elif rem == 1:
                w0 = w[co, ci, ky, kx]
                for f in range(nflat):
                    bp[f] += w0 * xp[f]


def _fwd_flat(floating[:, :, :, ::1] x, floating[:, :, :, ::1] w):
    """Stride-1 forward pass via the pitch-matched flat loop."""
    cdef Py_ssize_t nb = x.shape[0], ci_n = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t co_n = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = h - kh + 1
    cdef Py_ssize_t wo = wd - kw + 1
    out_arr = np.zeros((nb, co_n, ho, wo), dtype=_dtype_of(np.asarray(x)))
    buf_arr = np.zeros((nb * co_n, ho * wd), dtype=out_arr.dtype)
    cdef floating[:, :, :, ::1] out = out_arr
    cdef floating[:, ::1] buf = buf_arr
    cdef Py_ssize_t t, b, co, oy, ox
    cdef Py_ssize_t nflat = (ho - 1) * wd + wo
    cdef floating* bp
    for t in prange(nb * co_n, nogil=True, schedule="static"):
        b = t // co_n
        co = t % co_n
        bp = &buf[t, 0]
        _flat_task(bp, x, w, b, co, ci_n, kh, kw, nflat)
        for oy in range(ho):
            for ox in range(wo):
                out[b, co, oy, ox] = bp[oy * wd + ox]
    return out_arr


def _fwd_strided(floating[:, :, :, ::1] x, floating[:, :, :, ::1] w,
                 Py_ssize_t sy, Py_ssize_t sx):
    cdef Py_ssize_t nb = x.shape[0], ci_n = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t co_n = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = (h - kh) // sy + 1
    cdef Py_ssize_t wo = (wd - kw) // sx + 1
    out_arr = np.zeros((nb, co_n, ho, wo), dtype=_dtype_of(np.asarray(x)))
    cdef floating[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t t, b, co, ci, ky, kx, oy, ox, iy
    cdef floating wv
    for t in prange(nb * co_n, nogil=True, schedule="static"):
        b = t // co_n
        co = t % co_n
        for ci in range(ci_n):
            for ky in range(kh):
                for kx in range(kw):
                    wv = w[co, ci, ky, kx]
                    for oy in range(ho):
                        iy = oy * sy + ky
                        for ox in range(wo):
                            out[b, co, oy, ox] += wv * x[b, ci, iy, ox * sx + kx]
    return out_arr


def conv_fwd(x, w, sy, sx):
    """out[b,co,oy,ox] = sum_{ci,ky,kx} w[co,ci,ky,kx] * x[b,ci,oy*sy+ky,ox*sx+kx]"""
    if x.shape[1] != w.shape[1]:
        raise ValueError("weight/input channel mismatch")
    if sy == 1 and sx == 1:
        return _fwd_flat(x, w)
    return _fwd_strided(x, w, sy, sx)


def conv_bwd_input(g, w, sy, sx, h, wd):
    """Adjoint of conv_fwd w.r.t. the (padded) input, shape (B, Ci, h, wd)."""
    if w.shape[0] != g.shape[1]:
        raise ValueError("weight/gradient channel mismatch")
    kh, kw = w.shape[2], w.shape[3]
    if sy == 1 and sx == 1:
        # full correlation with the flipped, channel-transposed kernel
        gp = np.pad(g, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
        wt = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
        full = _fwd_flat(gp, wt)
        if full.shape[2] == h and full.shape[3] == wd:
            return full
        grown = np.zeros((g.shape[0], w.shape[1], h, wd), dtype=g.dtype)
        grown[:, :, : full.shape[2], : full.shape[3]] = full[:, :, :h, :wd]
        return grown
    return _bwd_input_strided(g, w, sy, sx, h, wd)


def _bwd_input_strided(floating[:, :, :, ::1] g, floating[:, :, :, ::1] w,
                       Py_ssize_t sy, Py_ssize_t sx, Py_ssize_t h, Py_ssize_t wd):
    cdef Py_ssize_t nb = g.shape[0], co_n = g.shape[1], ho = g.shape[2], wo = g.shape[3]
    cdef Py_ssize_t ci_n = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    gin_arr = np.zeros((nb, ci_n, h, wd), dtype=_dtype_of(np.asarray(g)))
    cdef floating[:, :, :, ::1] gin = gin_arr
    cdef Py_ssize_t t, b, ci, co, ky, kx, oy, ox, iy
    cdef floating wv
    for t in prange(nb * ci_n, nogil=True, schedule="static"):
        b = t // ci_n
        ci = t % ci_n
        for co in range(co_n):
            for ky in range(kh):
                for kx in range(kw):
                    wv = w[co, ci, ky, kx]
                    for oy in range(ho):
                        iy = oy * sy + ky
                        for ox in range(wo):
                            gin[b, ci, iy, ox * sx + kx] += wv * g[b, co, oy, ox]
    return gin_arr


def conv_bwd_weight(x, g, kh, kw, sy, sx):
    """Adjoint of conv_fwd w.r.t. the kernel, shape (Co, Ci, kh, kw)."""
    if x.shape[0] != g.shape[0]:
        raise ValueError("input/gradient batch mismatch")
    if sy == 1 and sx == 1:
        if g.shape[1] >= 16:
            # wide-output case: put the output-channel axis innermost so the
            # accumulation vectorizes across it
            g2 = np.ascontiguousarray(g.transpose(0, 2, 3, 1))
            scratch = _bwd_weight_channels(x, g2, kh, kw)
            return np.ascontiguousarray(scratch.transpose(3, 0, 1, 2))
        # swap batch and channel roles: correlating x with g yields the
        # weight gradient with (ci, co) leading axes
        xt = np.ascontiguousarray(x.transpose(1, 0, 2, 3))
        gt = np.ascontiguousarray(g.transpose(1, 0, 2, 3))
        gw = _fwd_flat(xt, gt)
        return np.ascontiguousarray(gw.transpose(1, 0, 2, 3))
    return _bwd_weight_strided(x, g, kh, kw, sy, sx)


def _bwd_weight_channels(floating[:, :, :, ::1] x, floating[:, :, :, ::1] g2,
                         Py_ssize_t kh, Py_ssize_t kw):
    """Stride-1 weight gradient accumulated as (Ci, kh, kw, Co)."""
    cdef Py_ssize_t nb = x.shape[0], ci_n = x.shape[1], wd = x.shape[3]
    cdef Py_ssize_t ho = g2.shape[1], wo = g2.shape[2], co_n = g2.shape[3]
    out_arr = np.zeros((ci_n, kh, kw, co_n), dtype=_dtype_of(np.asarray(x)))
    cdef floating[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t t, ci, ky, kx, b, oy, ox, c
    cdef floating x0, x1
    cdef floating* accp
    cdef floating* xrow
    cdef floating* gp0
    cdef floating* gp1
    for t in prange(ci_n * kh, nogil=True, schedule="static"):
        ci = t // kh
        ky = t % kh
        for kx in range(kw):
            accp = &out[ci, ky, kx, 0]
            for b in range(nb):
                for oy in range(ho):
                    xrow = &x[b, ci, oy + ky, kx]
                    ox = 0
                    while ox + 2 <= wo:
                        x0 = xrow[ox]
                        x1 = xrow[ox + 1]
                        gp0 = &g2[b, oy, ox, 0]
                        gp1 = &g2[b, oy, ox + 1, 0]
                        for c in range(co_n):
                            accp[c] += x0 * gp0[c] + x1 * gp1[c]
                        ox = ox + 2
                    if ox < wo:
                        x0 = xrow[ox]
                        gp0 = &g2[b, oy, ox, 0]
                        for c in range(co_n):
                            accp[c] += x0 * gp0[c]
    return out_arr


def _bwd_weight_strided(floating[:, :, :, ::1] x, floating[:, :, :, ::1] g,
                        Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t sy, Py_ssize_t sx):
    cdef Py_ssize_t nb = x.shape[0], ci_n = x.shape[1]
    cdef Py_ssize_t co_n = g.shape[1], ho = g.shape[2], wo = g.shape[3]
    gw_arr = np.zeros((co_n, ci_n, kh, kw), dtype=_dtype_of(np.asarray(x)))
    cdef floating[:, :, :, ::1] gw = gw_arr
    cdef Py_ssize_t cc, co, ci, ky, kx, b, oy, ox, iy
    cdef floating acc
    for cc in prange(co_n * ci_n, nogil=True, schedule="static"):
        co = cc // ci_n
        ci = cc % ci_n
        for ky in range(kh):
            for b in range(nb):
                for oy in range(ho):
                    iy = oy * sy + ky
                    for kx in range(kw):
                        acc = 0
                        for ox in range(wo):
                            acc = acc + x[b, ci, iy, ox * sx + kx] * g[b, co, oy, ox]
                        gw[co, ci, ky, kx] += acc
    return gw_arr
