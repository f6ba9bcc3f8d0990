"""VGG19 feature extractor: weight loading, forward capture, input gradient.

Only the 16 convolutional layers are used; the fully connected part of
the network is never loaded. A captured activation is the rectified
output of the named convolution, reshaped to (feature maps, map size).

Weight file format (little-endian): magic ``VGGW``, version u32,
channel mean 3 x f32, then per layer in architecture order: name length
u16 + UTF-8 name, kernel dims 4 x u32 (out, in, kh, kw), kernel f32,
bias length u32, bias f32. The per-channel means live in the header so
the file is self-describing.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ShapeError,
    WeightFormatError,
    WeightShapeError,
    WeightTruncatedError,
)
from .tensor_ops import ConvSpec, avgpool2, avgpool2_spread, conv2d
from . import kernels

MAGIC = b"VGGW"
VERSION = 1

# (name, in_channels, out_channels); pools sit between blocks
CONV_LAYERS = [
    ("conv1_1", 3, 64),
    ("conv1_2", 64, 64),
    ("conv2_1", 64, 128),
    ("conv2_2", 128, 128),
    ("conv3_1", 128, 256),
    ("conv3_2", 256, 256),
    ("conv3_3", 256, 256),
    ("conv3_4", 256, 256),
    ("conv4_1", 256, 512),
    ("conv4_2", 512, 512),
    ("conv4_3", 512, 512),
    ("conv4_4", 512, 512),
    ("conv5_1", 512, 512),
    ("conv5_2", 512, 512),
    ("conv5_3", 512, 512),
    ("conv5_4", 512, 512),
]

# full layer sequence: conv names plus a pool after each block
LAYER_SEQUENCE = []
for _name, _in, _out in CONV_LAYERS:
    LAYER_SEQUENCE.append(("conv", _name))
    if _name in ("conv1_2", "conv2_2", "conv3_4", "conv4_4", "conv5_4"):
        LAYER_SEQUENCE.append(("pool", "pool" + _name[4]))

# layer defaults used by the loss configuration; content follows the
# common choice of a single mid-depth layer, style spans the blocks
DEFAULT_CONTENT_LAYERS = ("conv4_2",)
DEFAULT_STYLE_LAYERS = ("conv1_1", "conv2_1", "conv3_1", "conv4_1", "conv5_1")

CONV_NAMES = [name for name, _, _ in CONV_LAYERS]
_CHANNELS = {name: (cin, cout) for name, cin, cout in CONV_LAYERS}


@dataclass
class VggModel:
    """Immutable layer table: ConvSpec per conv layer plus input means.

    ``pooling`` selects max (the network's native choice) or average
    pooling between blocks.
    """

    specs: dict
    mean: np.ndarray
    pooling: str = "max"

    def __post_init__(self):
        if self.pooling not in ("max", "avg"):
            raise WeightShapeError(f"pooling must be 'max' or 'avg', got {self.pooling!r}")
        for name, cin, cout in CONV_LAYERS:
            if name not in self.specs:
                raise WeightShapeError(f"missing layer {name}")
            spec = self.specs[name]
            if spec.kernel.shape != (cout, cin, 3, 3):
                raise WeightShapeError(
                    f"layer {name}: kernel shape {spec.kernel.shape}, "
                    f"expected {(cout, cin, 3, 3)}"
                )

    @property
    def dtype(self):
        return self.specs["conv1_1"].kernel.dtype

    def astype(self, dtype):
        """Copy of the model in another precision (float64 for verification)."""
        return VggModel(
            {name: spec.astype(dtype) for name, spec in self.specs.items()},
            self.mean.astype(dtype),
            self.pooling,
        )


@dataclass
class FeatureCapture:
    """Captured activations by layer name, each (N, D), plus grid sizes."""

    features: dict
    grids: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.features[name]

    def layers(self):
        return list(self.features)


def _read_exact(fh, n, layer):
    data = fh.read(n)
    if len(data) != n:
        raise WeightTruncatedError(layer)
    return data


def load_weights(path):
    """Read a VGGW weight file into a float32 model; fails atomically."""
    specs = {}
    with open(path, "rb") as fh:
        header = fh.read(4)
        if header != MAGIC:
            raise WeightFormatError(f"bad magic {header!r}, expected {MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "header"))
        if version != VERSION:
            raise WeightFormatError(f"unsupported weight file version {version}")
        mean = np.frombuffer(_read_exact(fh, 12, "header"), dtype="<f4").copy()

        for name, cin, cout in CONV_LAYERS:
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, name))
            stored = _read_exact(fh, name_len, name).decode("utf-8")
            if stored != name:
                raise WeightShapeError(f"expected layer {name}, file has {stored!r}")
            dims = struct.unpack("<4I", _read_exact(fh, 16, name))
            if dims != (cout, cin, 3, 3):
                raise WeightShapeError(
                    f"layer {name}: kernel dims {dims}, expected {(cout, cin, 3, 3)}"
                )
            n_kernel = cout * cin * 9
            kernel = np.frombuffer(
                _read_exact(fh, 4 * n_kernel, name), dtype="<f4"
            ).reshape(cout, cin, 3, 3)
            (bias_len,) = struct.unpack("<I", _read_exact(fh, 4, name))
            if bias_len != cout:
                raise WeightShapeError(
                    f"layer {name}: bias length {bias_len}, expected {cout}"
                )
            bias = np.frombuffer(_read_exact(fh, 4 * cout, name), dtype="<f4")
            specs[name] = ConvSpec(kernel.copy(), bias.copy())
    return VggModel(specs, mean)


def write_weights(path, specs, mean):
    """Write a model's conv layers in the VGGW format (testing and tooling)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(np.asarray(mean, dtype="<f4").tobytes())
        for name, _, _ in CONV_LAYERS:
            spec = specs[name]
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<4I", *spec.kernel.shape))
            fh.write(np.ascontiguousarray(spec.kernel, dtype="<f4").tobytes())
            fh.write(struct.pack("<I", spec.bias.shape[0]))
            fh.write(np.ascontiguousarray(spec.bias, dtype="<f4").tobytes())


def preprocess(model, image):
    """(H, W, 3) image in [0, 1] to the network input: (3, H, W), mean-free."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeError("expected an (H, W, 3) image", got=image.shape)
    if image.dtype not in (np.float32, np.float64):
        image = image.astype(np.float32)
    mean = model.mean.astype(image.dtype)
    return np.ascontiguousarray(image.transpose(2, 0, 1)) * image.dtype.type(255.0) - mean[:, None, None]


def postprocess(model, x):
    """Inverse of :func:`preprocess`, back to (H, W, 3) in [0, 1]."""
    if x.ndim != 3 or x.shape[0] != 3:
        raise ShapeError("expected a (3, H, W) tensor", got=x.shape)
    mean = model.mean.astype(x.dtype)
    return ((x + mean[:, None, None]) / x.dtype.type(255.0)).transpose(1, 2, 0)


def _check_layers(capture_layers):
    for name in capture_layers:
        if name not in _CHANNELS:
            raise ShapeError(f"unknown layer name {name!r}")


def forward(model, image, capture_layers, tape=None):
    """Run the network on a preprocessed (3, H, W) image.

    Captures exactly the requested layers and stops after the deepest
    one. When ``tape`` is a list, the records needed for the backward
    pass are appended to it.
    """
    _check_layers(capture_layers)
    wanted = set(capture_layers)
    deepest = max(CONV_NAMES.index(n) for n in wanted)

    captures = {}
    grids = {}
    x = np.ascontiguousarray(image)
    done = 0
    for kind, name in LAYER_SEQUENCE:
        if kind == "conv":
            spec = model.specs[name]
            if spec.kernel.dtype != x.dtype:
                spec = spec.astype(x.dtype)
            pre = conv2d(x, spec)
            x = np.maximum(pre, 0)
            if tape is not None:
                tape.append(("conv", spec, x.shape))
                tape.append(("relu", pre > 0))
            if name in wanted:
                c, h, w = x.shape
                captures[name] = x.reshape(c, h * w)
                grids[name] = (h, w)
                if tape is not None:
                    tape.append(("capture", name, x.shape))
            done = CONV_NAMES.index(name)
            if done >= deepest:
                break
        else:
            h, w = x.shape[1], x.shape[2]
            if model.pooling == "avg":
                x = avgpool2(x)
                if tape is not None:
                    tape.append(("avgpool", h, w))
            else:
                pooled, idx = kernels.maxpool2_fwd(x)
                if tape is not None:
                    tape.append(("pool", idx, h, w))
                x = pooled
    return FeatureCapture(captures, grids)


def backward_from_tape(tape, image_shape, dtype, layer_grads):
    """Chain layer-space gradients back to the preprocessed image."""
    grad = None
    for entry in reversed(tape):
        kind = entry[0]
        if kind == "capture":
            _, name, shape = entry
            if name in layer_grads:
                fg = np.asarray(layer_grads[name], dtype=dtype).reshape(shape)
                grad = fg.copy() if grad is None else grad + fg
        elif grad is None:
            continue
        elif kind == "relu":
            grad = grad * entry[1]
        elif kind == "conv":
            _, spec, out_shape = entry
            cin = spec.in_channels
            h, w = out_shape[1], out_shape[2]
            wmat = spec.kernel.reshape(spec.out_channels, cin * 9)
            gcols = wmat.T @ grad.reshape(spec.out_channels, h * w)
            grad = kernels.col2im3(np.ascontiguousarray(gcols), cin, h, w)
        elif kind == "avgpool":
            _, h, w = entry
            grad = avgpool2_spread(grad, h, w)
        else:  # max pool
            _, idx, h, w = entry
            grad = kernels.maxpool2_bwd(idx, np.ascontiguousarray(grad), h, w)
    if grad is None:
        return np.zeros(image_shape, dtype=dtype)
    return grad


def backward(model, image, layer_grads):
    """Gradient of sum_l <layer_grads[l], F_l(image)> w.r.t. the image.

    ``image`` is the preprocessed (3, H, W) input; the result has its
    shape. Gradients are additive across layers.
    """
    if not layer_grads:
        return np.zeros(image.shape, dtype=image.dtype)
    tape = []
    capture = forward(model, image, list(layer_grads), tape=tape)
    for name, g in layer_grads.items():
        want = capture[name].shape
        if np.asarray(g).shape != want:
            raise ShapeError(
                f"gradient for {name} has the wrong shape", expected=want, got=np.asarray(g).shape
            )
    return backward_from_tape(tape, image.shape, image.dtype, layer_grads)
