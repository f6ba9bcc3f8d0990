"""Reference activation dumps for cross-implementation comparison.

Runs the checkpoint through torch in float64 with the torchvision
normalization and stores the rectified activations of the requested
conv layers as an npz archive: one (N, D) float64 array per layer name,
plus the input image in [0, 1] under ``image``.
"""

import numpy as np
import torch
from PIL import Image

from .export import ExportError, IMAGENET_MEAN, IMAGENET_STD, LAYER_MAP, _load_state_dict
from .vggw import CONV_LAYERS

_NAMES = [name for name, _, _ in CONV_LAYERS]


def load_image(path):
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def reference_activations(state, image, layers):
    """Rectified conv activations as (N, D) float64 arrays by layer name."""
    for name in layers:
        if name not in LAYER_MAP:
            raise ExportError(f"unknown layer name {name!r}")
    deepest = max(_NAMES.index(n) for n in layers)

    x = torch.from_numpy(
        ((image - IMAGENET_MEAN) / IMAGENET_STD).transpose(2, 0, 1)[None]
    ).double()
    out = {}
    with torch.no_grad():
        done = 0
        for name, cin, cout in CONV_LAYERS:
            prefix = LAYER_MAP[name]
            weight = state[f"{prefix}.weight"].double()
            bias = state[f"{prefix}.bias"].double()
            x = torch.nn.functional.conv2d(x, weight, bias, padding=1)
            x = torch.relu(x)
            if name in layers:
                n, c, h, w = x.shape
                out[name] = x[0].reshape(c, h * w).numpy()
            done = _NAMES.index(name)
            if done >= deepest:
                break
            if name in ("conv1_2", "conv2_2", "conv3_4", "conv4_4"):
                x = torch.nn.functional.max_pool2d(x, 2, ceil_mode=True)
    return out


def emit_reference_activations(checkpoint, image_path, layers, out_path):
    """Compute and store reference activations; returns the npz path."""
    state = _load_state_dict(checkpoint)
    image = load_image(image_path)
    acts = reference_activations(state, image, layers)
    np.savez(out_path, image=image, **acts)
    return out_path
