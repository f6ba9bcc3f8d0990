# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot kernels.

Must stay numerically interchangeable with ``_numpy``: the gather,
scatter and pooling kernels reproduce the fallback bit for bit, the
matting kernel agrees to rounding (the fallback inverts its 3x3
systems through LAPACK, this one analytically).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef fused floating:
    float
    double


def im2col3(floating[:, :, ::1] x):
    cdef Py_ssize_t c = x.shape[0]
    cdef Py_ssize_t h = x.shape[1]
    cdef Py_ssize_t w = x.shape[2]
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out = np.zeros((c * 9, h * w), dtype=dtype)
    cdef floating[:, ::1] o = out
    cdef Py_ssize_t ci, ki, kj, y, xx, row, iy, x0, x1, base, shift
    for ci in range(c):
        for ki in range(3):
            for kj in range(3):
                row = ci * 9 + ki * 3 + kj
                # valid output column range for this kernel offset
                x0 = 1 - kj if kj < 1 else 0
                x1 = w if kj < 2 else w - 1
                shift = kj - 1
                for y in range(h):
                    iy = y + ki - 1
                    if iy < 0 or iy >= h:
                        continue
                    base = y * w
                    for xx in range(x0, x1):
                        o[row, base + xx] = x[ci, iy, xx + shift]
    return out


def col2im3(floating[:, ::1] cols, Py_ssize_t c, Py_ssize_t h, Py_ssize_t w):
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out = np.zeros((c, h, w), dtype=dtype)
    cdef floating[:, :, ::1] o = out
    cdef floating acc
    cdef Py_ssize_t ci, oy, ox, ki, kj, y, xx
    for ci in range(c):
        for oy in range(h):
            for ox in range(w):
                acc = 0
                # same accumulation order as the fallback: ki-major
                for ki in range(3):
                    y = oy + 1 - ki
                    if y < 0 or y >= h:
                        continue
                    for kj in range(3):
                        xx = ox + 1 - kj
                        if 0 <= xx < w:
                            acc = acc + cols[ci * 9 + ki * 3 + kj, y * w + xx]
                o[ci, oy, ox] = acc
    return out


def maxpool2_fwd(floating[:, :, ::1] x):
    cdef Py_ssize_t c = x.shape[0]
    cdef Py_ssize_t h = x.shape[1]
    cdef Py_ssize_t w = x.shape[2]
    cdef Py_ssize_t ho = (h + 1) // 2
    cdef Py_ssize_t wo = (w + 1) // 2
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    pooled = np.empty((c, ho, wo), dtype=dtype)
    idx = np.empty((c, ho, wo), dtype=np.uint8)
    cdef floating[:, :, ::1] p = pooled
    cdef unsigned char[:, :, ::1] ix = idx
    cdef floating best, v
    cdef Py_ssize_t ci, oy, ox, di, dj, iy, jx
    cdef unsigned char slot, bestslot
    for ci in range(c):
        for oy in range(ho):
            for ox in range(wo):
                best = 0
                bestslot = 0
                slot = 0
                for di in range(2):
                    iy = 2 * oy + di
                    if iy >= h:
                        iy = h - 1  # edge replication for odd extents
                    for dj in range(2):
                        jx = 2 * ox + dj
                        if jx >= w:
                            jx = w - 1
                        v = x[ci, iy, jx]
                        if slot == 0 or v > best:
                            best = v
                            bestslot = slot
                        slot = slot + 1
                p[ci, oy, ox] = best
                ix[ci, oy, ox] = bestslot
    return pooled, idx


def maxpool2_bwd(unsigned char[:, :, ::1] idx, floating[:, :, ::1] upstream,
                 Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t c = upstream.shape[0]
    cdef Py_ssize_t ho = upstream.shape[1]
    cdef Py_ssize_t wo = upstream.shape[2]
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out = np.zeros((c, h, w), dtype=dtype)
    cdef floating[:, :, ::1] o = out
    cdef Py_ssize_t ci, oy, ox, iy, jx
    cdef unsigned char slot
    for ci in range(c):
        for oy in range(ho):
            for ox in range(wo):
                slot = idx[ci, oy, ox]
                iy = 2 * oy + (slot >> 1)
                jx = 2 * ox + (slot & 1)
                if iy >= h:
                    iy = h - 1
                if jx >= w:
                    jx = w - 1
                o[ci, iy, jx] += upstream[ci, oy, ox]
    return out


def matting_values_slab(double[:, :, ::1] img, double eps,
                        Py_ssize_t row0, Py_ssize_t row1, Py_ssize_t radius=1):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t m = 2 * radius + 1
    cdef Py_ssize_t wsz = m * m
    cdef Py_ssize_t cols_per_row = w - m + 1
    cdef Py_ssize_t n_win = (row1 - row0) * cols_per_row

    out = np.empty((n_win, wsz * wsz), dtype=np.float64)
    cen_buf = np.empty((wsz, 3), dtype=np.float64)
    u_buf = np.empty((wsz, 3), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[:, ::1] cen = cen_buf
    cdef double[:, ::1] u = u_buf

    cdef double inv_wsz = 1.0 / wsz
    cdef double mu0, mu1, mu2, s0, s1, s2
    cdef double c00, c01, c02, c11, c12, c22
    cdef double i00, i01, i02, i11, i12, i22, det
    cdef double a0, a1, a2, q
    cdef Py_ssize_t wy, wx, win, k, dy, dx, i, j

    win = 0
    for wy in range(row0, row1):
        for wx in range(cols_per_row):
            s0 = s1 = s2 = 0.0
            k = 0
            for dy in range(m):
                for dx in range(m):
                    cen[k, 0] = img[wy + dy, wx + dx, 0]
                    cen[k, 1] = img[wy + dy, wx + dx, 1]
                    cen[k, 2] = img[wy + dy, wx + dx, 2]
                    s0 += cen[k, 0]
                    s1 += cen[k, 1]
                    s2 += cen[k, 2]
                    k += 1
            mu0 = s0 * inv_wsz
            mu1 = s1 * inv_wsz
            mu2 = s2 * inv_wsz

            c00 = c01 = c02 = c11 = c12 = c22 = 0.0
            for k in range(wsz):
                a0 = cen[k, 0] - mu0
                a1 = cen[k, 1] - mu1
                a2 = cen[k, 2] - mu2
                cen[k, 0] = a0
                cen[k, 1] = a1
                cen[k, 2] = a2
                c00 += a0 * a0
                c01 += a0 * a1
                c02 += a0 * a2
                c11 += a1 * a1
                c12 += a1 * a2
                c22 += a2 * a2
            c00 = c00 * inv_wsz + eps * inv_wsz
            c01 *= inv_wsz
            c02 *= inv_wsz
            c11 = c11 * inv_wsz + eps * inv_wsz
            c12 *= inv_wsz
            c22 = c22 * inv_wsz + eps * inv_wsz

            # analytic inverse of the regularized 3x3 covariance
            i00 = c11 * c22 - c12 * c12
            i01 = c02 * c12 - c01 * c22
            i02 = c01 * c12 - c02 * c11
            i11 = c00 * c22 - c02 * c02
            i12 = c01 * c02 - c00 * c12
            i22 = c00 * c11 - c01 * c01
            det = c00 * i00 + c01 * i01 + c02 * i02
            i00 /= det
            i01 /= det
            i02 /= det
            i11 /= det
            i12 /= det
            i22 /= det

            for k in range(wsz):
                a0 = cen[k, 0]
                a1 = cen[k, 1]
                a2 = cen[k, 2]
                u[k, 0] = i00 * a0 + i01 * a1 + i02 * a2
                u[k, 1] = i01 * a0 + i11 * a1 + i12 * a2
                u[k, 2] = i02 * a0 + i12 * a1 + i22 * a2

            for i in range(wsz):
                for j in range(wsz):
                    q = cen[i, 0] * u[j, 0] + cen[i, 1] * u[j, 1] + cen[i, 2] * u[j, 2]
                    if i == j:
                        o[win, i * wsz + j] = 1.0 - (1.0 + q) * inv_wsz
                    else:
                        o[win, i * wsz + j] = -(1.0 + q) * inv_wsz
            win += 1
    return out
