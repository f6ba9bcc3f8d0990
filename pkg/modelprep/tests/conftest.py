"""Fixtures: seeded checkpoints and a fixed test image."""

import numpy as np
import pytest
import torch
from PIL import Image

from modelprep.vggw import CONV_LAYERS
from modelprep.export import TORCHVISION_INDICES


def make_vgg19_checkpoint(path, seed=11):
    """features-only VGG19 state dict with seeded He-scaled weights."""
    gen = torch.Generator().manual_seed(seed)
    state = {}
    for (name, cin, cout), idx in zip(CONV_LAYERS, TORCHVISION_INDICES):
        scale = (2.0 / (cin * 9)) ** 0.5
        state[f"features.{idx}.weight"] = torch.randn(
            (cout, cin, 3, 3), generator=gen
        ) * scale
        state[f"features.{idx}.bias"] = torch.rand(cout, generator=gen) * 0.1 - 0.05
    torch.save(state, path)
    return path


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "vgg19_random.pth"
    return make_vgg19_checkpoint(path)


@pytest.fixture(scope="session")
def test_image(tmp_path_factory):
    """Fixed 64x64 test photo."""
    gen = np.random.default_rng(21)
    yy, xx = np.mgrid[0:64, 0:64] / 64.0
    img = np.stack(
        [0.3 + 0.5 * yy, 0.4 + 0.4 * xx, 0.6 - 0.3 * yy * xx], axis=-1
    )
    img = np.clip(img + gen.normal(0, 0.04, (64, 64, 3)), 0, 1)
    path = tmp_path_factory.mktemp("img") / "test64.png"
    Image.fromarray((img * 255 + 0.5).astype(np.uint8)).save(path)
    return path
