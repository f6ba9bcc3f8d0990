"""Closed-form matting Laplacian and the photorealism (affine) loss.

The Laplacian is assembled from all fully interior square windows of
the content image; each window contributes a rank-deficient PSD block,
so constant-per-channel images and locally affine recombinations of the
input channels sit in the null space up to the regularization eps.
Construction is the memory-heavy step of the whole pipeline, so it runs
in window slabs and is cached to disk keyed by an image digest.
"""

import hashlib
import struct

import numpy as np
import scipy.sparse

from . import kernels
from .errors import InputError, ShapeError

CACHE_MAGIC = b"MATL"

# windows per assembly slab; bounds peak memory at ~slab * wsz^2 floats
_SLAB_WINDOWS = 65536


class SparseSymmetricMatrix:
    """Sparse symmetric PSD matrix over n pixels, canonical row-major order."""

    def __init__(self, csr):
        csr = csr.tocsr()
        csr.sum_duplicates()
        csr.sort_indices()
        self._csr = csr
        self.n = csr.shape[0]

    @property
    def nnz(self):
        return self._csr.nnz

    def triplets(self):
        """(rows, cols, values) sorted row-major."""
        indptr = self._csr.indptr
        rows = np.repeat(np.arange(self.n, dtype=np.uint32), np.diff(indptr))
        return rows, self._csr.indices.astype(np.uint32), self._csr.data

    def max_row_nnz(self):
        return int(np.max(np.diff(self._csr.indptr), initial=0))

    def row_sums(self):
        return np.asarray(self._csr.sum(axis=1)).ravel()

    def symmetry_error(self):
        diff = self._csr - self._csr.T
        return float(np.max(np.abs(diff.data), initial=0.0))

    def matvec(self, v):
        return self._csr @ v

    def quad(self, v):
        """v^T M v."""
        return float(v @ (self._csr @ v))

    def save(self, path):
        rows, cols, vals = self.triplets()
        with open(path, "wb") as fh:
            fh.write(CACHE_MAGIC)
            fh.write(struct.pack("<II", self.n, self.nnz))
            fh.write(rows.astype("<u4").tobytes())
            fh.write(cols.astype("<u4").tobytes())
            fh.write(vals.astype("<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != CACHE_MAGIC:
                raise InputError(f"bad Laplacian cache magic {magic!r}")
            n, nnz = struct.unpack("<II", fh.read(8))
            rows = np.frombuffer(fh.read(4 * nnz), dtype="<u4")
            cols = np.frombuffer(fh.read(4 * nnz), dtype="<u4")
            vals = np.frombuffer(fh.read(8 * nnz), dtype="<f8")
            if len(rows) != nnz or len(cols) != nnz or len(vals) != nnz:
                raise InputError("truncated Laplacian cache file")
        csr = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        return cls(csr)


def _window_indices(width, row0, row1, m):
    cols_per_row = width - m + 1
    base = (
        np.arange(row0, row1, dtype=np.int64)[:, None] * width
        + np.arange(cols_per_row, dtype=np.int64)[None, :]
    ).ravel()
    offs = (np.arange(m)[:, None] * width + np.arange(m)[None, :]).ravel()
    return base[:, None] + offs[None, :]


def build_matting_laplacian(image, window_radius=1, eps=1e-7):
    """Matting Laplacian of an (H, W, 3) image in [0, 1], float64 CSR.

    Border pixels participate only in fully interior windows; there is
    no padding. ``eps`` regularizes each window's color covariance.
    """
    img = np.ascontiguousarray(np.asarray(image, dtype=np.float64))
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError("expected an (H, W, 3) image", got=img.shape)
    if not np.all(np.isfinite(img)):
        raise InputError("image contains non-finite pixels")
    h, w, _ = img.shape
    m = 2 * window_radius + 1
    if h < m or w < m:
        raise ShapeError(
            f"image smaller than the {m}x{m} matting window", got=(h, w)
        )

    n = h * w
    wsz = m * m
    total_rows = h - m + 1
    cols_per_row = w - m + 1
    slab = max(1, _SLAB_WINDOWS // cols_per_row)

    acc = None
    for r0 in range(0, total_rows, slab):
        r1 = min(total_rows, r0 + slab)
        vals = kernels.matting_values_slab(img, eps, r0, r1, window_radius)
        win = _window_indices(w, r0, r1, m)
        rows = np.repeat(win, wsz, axis=1).ravel()
        cols = np.tile(win, (1, wsz)).ravel()
        part = scipy.sparse.coo_matrix(
            (vals.ravel(), (rows, cols)), shape=(n, n)
        ).tocsr()
        acc = part if acc is None else acc + part
    return SparseSymmetricMatrix(acc)


def affine_loss(laplacian, image):
    """Eq.-style photorealism penalty: sum over channels of v^T M v."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError("expected an (H, W, 3) image", got=img.shape)
    if img.shape[0] * img.shape[1] != laplacian.n:
        raise ShapeError(
            "image pixel count does not match the Laplacian",
            expected=laplacian.n,
            got=img.shape[0] * img.shape[1],
        )
    total = 0.0
    for c in range(3):
        total += laplacian.quad(img[:, :, c].ravel().astype(np.float64))
    return total


def affine_loss_grad(laplacian, image):
    """Gradient of :func:`affine_loss`: 2 M v per channel, image-shaped."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError("expected an (H, W, 3) image", got=img.shape)
    h, w, _ = img.shape
    if h * w != laplacian.n:
        raise ShapeError(
            "image pixel count does not match the Laplacian",
            expected=laplacian.n,
            got=h * w,
        )
    grad = np.empty((h, w, 3), dtype=np.float64)
    for c in range(3):
        v = img[:, :, c].ravel().astype(np.float64)
        grad[:, :, c] = (2.0 * laplacian.matvec(v)).reshape(h, w)
    return grad.astype(img.dtype, copy=False)


def cache_key(image, window_radius, eps):
    """Digest identifying a Laplacian build of this image and settings."""
    img = np.ascontiguousarray(np.asarray(image, dtype=np.float64))
    digest = hashlib.sha256()
    digest.update(struct.pack("<iid", img.shape[0], img.shape[1], eps))
    digest.update(struct.pack("<i", window_radius))
    digest.update(img.tobytes())
    return digest.hexdigest()[:24]


def load_or_build(image, cache_dir=None, window_radius=1, eps=1e-7):
    """Return the Laplacian, reusing a cache file when one is present."""
    if cache_dir is None:
        return build_matting_laplacian(image, window_radius, eps)
    path = cache_dir / f"{cache_key(image, window_radius, eps)}.matl"
    if path.exists():
        return SparseSymmetricMatrix.load(path)
    laplacian = build_matting_laplacian(image, window_radius, eps)
    cache_dir.mkdir(parents=True, exist_ok=True)
    laplacian.save(path)
    return laplacian
