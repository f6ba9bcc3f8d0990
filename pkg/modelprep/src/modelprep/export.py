"""Export VGG19 conv weights from a torchvision checkpoint to VGGW.

The engine preprocesses images as ``255 * x - mean255`` while
torchvision models expect ``(x - mean) / std``. The two conventions are
reconciled at export time: the conv1_1 kernel is divided per input
channel by ``255 * std`` and the header mean is ``255 * mean``, which
makes the exported network reproduce the checkpoint's activations
exactly without a std term at inference time.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import vggw

IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float64)
IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float64)

# torchvision vgg19().features indices of the conv layers, in order
TORCHVISION_INDICES = [0, 2, 5, 7, 10, 12, 14, 16, 19, 21, 23, 25, 28, 30, 32, 34]

LAYER_MAP = {
    name: f"features.{idx}"
    for (name, _, _), idx in zip(vggw.CONV_LAYERS, TORCHVISION_INDICES)
}


class ExportError(Exception):
    pass


@dataclass
class ExportManifest:
    source: str
    layer_map: dict
    channel_mean: list
    output_digest: str
    notes: str = "conv1_1 kernels fold the 1/(255*std) normalization"
    extras: dict = field(default_factory=dict)

    def save(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=2), encoding="utf-8")


def _load_state_dict(source):
    if source == "torchvision:vgg19":
        try:
            import torchvision

            model = torchvision.models.vgg19(
                weights=torchvision.models.VGG19_Weights.IMAGENET1K_V1
            )
            return model.state_dict()
        except Exception as exc:
            raise ExportError(
                "could not fetch the torchvision VGG19 checkpoint (offline?); "
                "download it on a connected machine with "
                "torchvision.models.vgg19(weights='IMAGENET1K_V1') and pass the "
                f"saved state_dict path instead ({exc})"
            ) from exc
    path = Path(source)
    if not path.exists():
        raise ExportError(f"checkpoint not found: {source}")
    state = torch.load(path, map_location="cpu", weights_only=True)
    if isinstance(state, dict) and "state_dict" in state:
        state = state["state_dict"]
    return state


def folded_layers(state):
    """name -> (kernel, bias) float32, with normalization folded into conv1_1."""
    layers = {}
    for name, _, _ in vggw.CONV_LAYERS:
        prefix = LAYER_MAP[name]
        try:
            kernel = state[f"{prefix}.weight"].detach().numpy().astype(np.float64)
            bias = state[f"{prefix}.bias"].detach().numpy().astype(np.float64)
        except KeyError:
            raise ExportError(f"checkpoint is missing layer {name} ({prefix})") from None
        if name == "conv1_1":
            kernel = kernel / (255.0 * IMAGENET_STD)[None, :, None, None]
        layers[name] = (kernel.astype(np.float32), bias.astype(np.float32))
    return layers


def export_vgg_weights(source, out_path):
    """Write a VGGW file from ``source`` and return its manifest.

    ``source`` is a saved state_dict path or ``torchvision:vgg19``.
    Deterministic: re-exporting the same checkpoint is byte-identical.
    """
    state = _load_state_dict(source)
    layers = folded_layers(state)
    mean = (255.0 * IMAGENET_MEAN).astype(np.float32)
    vggw.write(out_path, layers, mean)

    digest = hashlib.sha256(Path(out_path).read_bytes()).hexdigest()
    manifest = ExportManifest(
        source=str(source),
        layer_map=dict(LAYER_MAP),
        channel_mean=[float(v) for v in mean],
        output_digest=digest,
    )
    manifest.save(Path(str(out_path) + ".manifest.json"))
    return manifest
