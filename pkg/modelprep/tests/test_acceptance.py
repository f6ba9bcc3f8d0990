"""Acceptance: weight-export round trip and generated-mask conformance."""

import numpy as np
import torch

from modelprep import activations, export, segmentation


def test_weight_export_round_trip(checkpoint, test_image, tmp_path):
    """Engine forward on the fixed image matches torch at conv1_1 and conv4_2."""
    from photostyle import vgg

    weights = tmp_path / "vgg19.vggw"
    export.export_vgg_weights(checkpoint, weights)
    acts = tmp_path / "reference.npz"
    activations.emit_reference_activations(
        checkpoint, test_image, ["conv1_1", "conv4_2"], acts
    )
    data = np.load(acts)

    model = vgg.load_weights(weights).astype(np.float64)
    caps = vgg.forward(
        model, vgg.preprocess(model, data["image"]), ["conv1_1", "conv4_2"]
    )
    for layer in ("conv1_1", "conv4_2"):
        ref = data[layer]
        err = np.linalg.norm(caps[layer] - ref) / np.linalg.norm(ref)
        assert err < 1e-4, f"{layer}: relative error {err}"
        assert caps[layer].shape == ref.shape
    print("ACCEPTANCE PASS: weight-export round trip (conv1_1, conv4_2 < 1e-4)")


def test_generated_palette_and_mask_conformance(test_image, tmp_path):
    """Generated palette satisfies the repaired invariants; mask fits the photo."""
    import torchvision.models.segmentation as seg_models

    from photostyle import segmentation as engine_seg
    from PIL import Image

    torch.manual_seed(5)
    model = seg_models.lraspp_mobilenet_v3_large(
        num_classes=150, weights=None, weights_backbone=None
    )
    ckpt = tmp_path / "lraspp.pth"
    torch.save(model.state_dict(), ckpt)

    mask_path, palette_path = segmentation.generate_segmentation(
        test_image,
        tmp_path / "mask.png",
        tmp_path / "palette.txt",
        checkpoint=ckpt,
        arch="lraspp_mobilenet_v3_large",
    )

    palette = engine_seg.load_palette(palette_path)
    assert palette.is_repaired()
    repaired_again = engine_seg.repair_palette(palette)
    assert [e.words for e in repaired_again.entries] == [e.words for e in palette.entries]

    with Image.open(mask_path) as mask, Image.open(test_image) as photo:
        assert mask.size == photo.size

    segmap = engine_seg.load_segmentation(mask_path, palette)  # every color maps
    assert len(segmap.classes) >= 1
    print("ACCEPTANCE PASS: generated palette invariants and mask dimensions")
