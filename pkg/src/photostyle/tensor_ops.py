"""Differentiable compute kernels: 3x3 convolution, 2x2 max pooling, ReLU.

All operations work on channels-first float32 or float64 arrays and
preserve the input dtype. Convolution is stride 1 with zero padding, so
spatial extents are preserved. Each forward operation has a matching
input-gradient operation; gradients are checked against centered finite
differences in the test suite (double precision).
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeError

_FLOAT_DTYPES = (np.float32, np.float64)


def _check_float(x, name):
    if x.dtype not in _FLOAT_DTYPES:
        raise ShapeError(f"{name} must be float32 or float64, got {x.dtype}")


@dataclass(frozen=True)
class ConvSpec:
    """One convolution layer: kernel (out, in, 3, 3) and bias (out,)."""

    kernel: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        k = self.kernel
        if k.ndim != 4 or k.shape[2] != 3 or k.shape[3] != 3:
            raise ShapeError("kernel must be (out, in, 3, 3)", got=k.shape)
        if self.bias.shape != (k.shape[0],):
            raise ShapeError(
                "bias length must equal out-channels",
                expected=(k.shape[0],),
                got=self.bias.shape,
            )

    @property
    def in_channels(self):
        return self.kernel.shape[1]

    @property
    def out_channels(self):
        return self.kernel.shape[0]

    def astype(self, dtype):
        return ConvSpec(self.kernel.astype(dtype), self.bias.astype(dtype))


def conv2d(x, spec):
    """Same-size 3x3 convolution of (C, H, W) input with zero padding."""
    _check_float(x, "input")
    if x.ndim != 3 or x.shape[0] != spec.in_channels:
        raise ShapeError(
            "input channels do not match kernel",
            expected=(spec.in_channels, "H", "W"),
            got=x.shape,
        )
    c, h, w = x.shape
    cols = kernels.im2col3(np.ascontiguousarray(x))
    wmat = spec.kernel.reshape(spec.out_channels, c * 9).astype(x.dtype, copy=False)
    out = wmat @ cols
    out += spec.bias.astype(x.dtype, copy=False)[:, None]
    return out.reshape(spec.out_channels, h, w)


def conv2d_grad(x, spec, upstream):
    """Gradient of conv2d w.r.t. its input, given upstream (out_c, H, W)."""
    _check_float(upstream, "upstream")
    c, h, w = x.shape
    if upstream.shape != (spec.out_channels, h, w):
        raise ShapeError(
            "upstream shape does not match conv output",
            expected=(spec.out_channels, h, w),
            got=upstream.shape,
        )
    wmat = spec.kernel.reshape(spec.out_channels, c * 9).astype(upstream.dtype, copy=False)
    gcols = wmat.T @ upstream.reshape(spec.out_channels, h * w)
    return kernels.col2im3(np.ascontiguousarray(gcols), c, h, w)


def maxpool2(x):
    """2x2 stride-2 max pool; odd spatial extents are edge-replicated."""
    _check_float(x, "input")
    if x.size == 0:
        raise ShapeError("cannot pool an empty tensor", got=x.shape)
    pooled, _ = kernels.maxpool2_fwd(np.ascontiguousarray(x))
    return pooled


def maxpool2_grad(x, upstream):
    """Route upstream to argmax positions (ties to the first, row-major)."""
    _check_float(upstream, "upstream")
    if x.size == 0:
        raise ShapeError("cannot pool an empty tensor", got=x.shape)
    c, h, w = x.shape
    expected = (c, (h + 1) // 2, (w + 1) // 2)
    if upstream.shape != expected:
        raise ShapeError(
            "upstream shape does not match pooled output",
            expected=expected,
            got=upstream.shape,
        )
    _, idx = kernels.maxpool2_fwd(np.ascontiguousarray(x))
    return kernels.maxpool2_bwd(idx, np.ascontiguousarray(upstream), h, w)


def avgpool2(x):
    """2x2 stride-2 average pool; odd spatial extents are edge-replicated.

    The style-transfer literature sometimes swaps this in for max
    pooling; the extractor exposes it as a per-model option.
    """
    _check_float(x, "input")
    if x.size == 0:
        raise ShapeError("cannot pool an empty tensor", got=x.shape)
    c, h, w = x.shape
    if h % 2:
        x = np.concatenate([x, x[:, -1:, :]], axis=1)
        h += 1
    if w % 2:
        x = np.concatenate([x, x[:, :, -1:]], axis=2)
        w += 1
    return x.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4))


def avgpool2_spread(upstream, h, w):
    """Adjoint of avgpool2 given the original (possibly odd) extents."""
    full = np.repeat(np.repeat(upstream, 2, axis=1), 2, axis=2) * upstream.dtype.type(0.25)
    if full.shape[1] > h:
        full[:, h - 1, :] += full[:, h, :]
        full = full[:, :h, :]
    if full.shape[2] > w:
        full[:, :, w - 1] += full[:, :, w]
        full = full[:, :, :w]
    return np.ascontiguousarray(full)


def avgpool2_grad(x, upstream):
    """Spread each upstream value uniformly over its 2x2 block."""
    _check_float(upstream, "upstream")
    c, h, w = x.shape
    expected = (c, (h + 1) // 2, (w + 1) // 2)
    if upstream.shape != expected:
        raise ShapeError(
            "upstream shape does not match pooled output",
            expected=expected,
            got=upstream.shape,
        )
    return avgpool2_spread(upstream, h, w)


def relu(x):
    """Elementwise max(0, x)."""
    return np.maximum(x, 0)


def relu_grad(x, upstream):
    """Upstream gated by x > 0; the gradient at exactly 0 is defined as 0."""
    return np.where(x > 0, upstream, 0).astype(upstream.dtype, copy=False)
