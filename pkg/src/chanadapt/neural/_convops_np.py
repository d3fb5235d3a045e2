"""NumPy implementation of the correlation kernels.

Same contracts as the compiled module: inputs are pre-padded C-contiguous
(B, C, H, W) arrays.  Windows are gathered with ``sliding_window_view`` and
contracted through BLAS, which is considerably faster than Python loops but
still several times slower than the compiled core on training-sized batches.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_fwd(x, w, sy, sx):
    win = sliding_window_view(x, w.shape[2:], axis=(2, 3))[:, :, ::sy, ::sx]
    out = np.tensordot(win, w, axes=((1, 4, 5), (1, 2, 3)))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv_bwd_input(g, w, sy, sx, h, wd):
    nb, co_n, ho, wo = g.shape
    _, ci_n, kh, kw = w.shape
    dil = np.zeros((nb, co_n, (ho - 1) * sy + 1, (wo - 1) * sx + 1), dtype=g.dtype)
    dil[:, :, ::sy, ::sx] = g
    pad = np.pad(dil, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
    flipped = w[:, :, ::-1, ::-1]
    win = sliding_window_view(pad, (kh, kw), axis=(2, 3))
    gin = np.tensordot(win, flipped, axes=((1, 4, 5), (0, 2, 3)))
    gin = np.ascontiguousarray(gin.transpose(0, 3, 1, 2))
    # strided windows can stop short of the last (stride-1) input pixels,
    # which receive zero gradient
    full = np.zeros((nb, ci_n, h, wd), dtype=g.dtype)
    full[:, :, : gin.shape[2], : gin.shape[3]] = gin[:, :, :h, :wd]
    return full


def conv_bwd_weight(x, g, kh, kw, sy, sx):
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sy, ::sx]
    return np.ascontiguousarray(np.tensordot(g, win, axes=((0, 2, 3), (0, 2, 3))))
