"""Numpy implementations of the hot kernels.

This is the fallback backend used when the compiled extension is not
available. Both backends implement the same functions with identical
numerical results; the heavy matrix products stay in BLAS either way,
the extension only speeds up the gather/scatter parts.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def im2col3(x):
    """Unfold 3x3 zero-padded patches of a (C, H, W) array into (C*9, H*W).

    Column layout: row index is c*9 + ki*3 + kj, column index is y*W + x.
    """
    c, h, w = x.shape
    xp = np.zeros((c, h + 2, w + 2), dtype=x.dtype)
    xp[:, 1:-1, 1:-1] = x
    sc, sh, sw = xp.strides
    view = as_strided(xp, shape=(c, 3, 3, h, w), strides=(sc, sh, sw, sh, sw))
    return view.reshape(c * 9, h * w)


def col2im3(cols, c, h, w):
    """Adjoint of :func:`im2col3`: scatter-add columns back to (C, H, W)."""
    out = np.zeros((c, h + 2, w + 2), dtype=cols.dtype)
    cols6 = cols.reshape(c, 3, 3, h, w)
    for ki in range(3):
        for kj in range(3):
            out[:, ki : ki + h, kj : kj + w] += cols6[:, ki, kj]
    return np.ascontiguousarray(out[:, 1 : h + 1, 1 : w + 1])


def _pad_even(x):
    """Replicate the last row/column so both spatial extents are even."""
    c, h, w = x.shape
    if h % 2:
        x = np.concatenate([x, x[:, -1:, :]], axis=1)
    if w % 2:
        x = np.concatenate([x, x[:, :, -1:]], axis=2)
    return x


def maxpool2_fwd(x):
    """2x2/stride-2 max pool of (C, H, W); odd extents are edge-replicated.

    Returns (pooled, argmax) where argmax holds the winning position of
    each 2x2 block as uint8 in 0..3, row-major within the block. Ties
    resolve to the first index because ``argmax`` keeps the first maximum.
    """
    x = _pad_even(x)
    c, h, w = x.shape
    blocks = (
        x.reshape(c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 3, 2, 4)
        .reshape(c, h // 2, w // 2, 4)
    )
    idx = blocks.argmax(axis=3).astype(np.uint8)
    pooled = np.take_along_axis(blocks, idx[..., None].astype(np.intp), axis=3)[..., 0]
    return np.ascontiguousarray(pooled), idx


def maxpool2_bwd(idx, upstream, h, w):
    """Route upstream values to the argmax positions of a 2x2 max pool.

    ``h``/``w`` are the original (possibly odd) input extents; gradient
    flowing into a replicated row/column is folded back onto the edge.
    """
    c, ho, wo = upstream.shape
    grads = np.zeros((c, ho, wo, 4), dtype=upstream.dtype)
    np.put_along_axis(grads, idx[..., None].astype(np.intp), upstream[..., None], axis=3)
    full = (
        grads.reshape(c, ho, wo, 2, 2)
        .transpose(0, 1, 3, 2, 4)
        .reshape(c, ho * 2, wo * 2)
    )
    if ho * 2 > h:
        full[:, h - 1, :] += full[:, h, :]
        full = full[:, :h, :]
    if wo * 2 > w:
        full[:, :, w - 1] += full[:, :, w]
        full = full[:, :, :w]
    return np.ascontiguousarray(full)


def matting_values_slab(img, eps, row0, row1, radius=1):
    """Per-window matting Laplacian entries for window rows [row0, row1).

    ``img`` is (H, W, 3) float64 in [0, 1]; windows are (2*radius+1)^2
    with top-left rows in the given range. Returns (n_windows, wsz*wsz)
    float64 holding each window's contribution, pixel order row-major
    within the window.
    """
    h, w, _ = img.shape
    m = 2 * radius + 1
    wsz = m * m
    flat = img.reshape(h * w, 3)
    cols_per_row = w - m + 1
    n_win = (row1 - row0) * cols_per_row

    # pixel indices of every window member, (n_win, 9)
    base = (np.arange(row0, row1)[:, None] * w + np.arange(cols_per_row)[None, :]).ravel()
    offs = (np.arange(m)[:, None] * w + np.arange(m)[None, :]).ravel()
    win_idx = base[:, None] + offs[None, :]

    win = flat[win_idx]  # (n_win, 9, 3)
    mu = win.mean(axis=1, keepdims=True)
    centered = win - mu
    cov = centered.transpose(0, 2, 1) @ centered / wsz
    inv = np.linalg.inv(cov + (eps / wsz) * np.eye(3))
    quad = (centered @ inv) @ centered.transpose(0, 2, 1)  # (n_win, 9, 9)
    vals = np.eye(wsz) - (1.0 + quad) / wsz
    return vals.reshape(n_win, wsz * wsz)
