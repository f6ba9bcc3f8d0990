"""Weight export, activation dumps, and segmentation generation."""

import numpy as np
import pytest
import torch

from modelprep import activations, export, segmentation
from modelprep.export import ExportError

from conftest import make_vgg19_checkpoint


class TestExportWeights:
    def test_exported_file_parses_in_engine(self, checkpoint, tmp_path):
        out = tmp_path / "w.vggw"
        manifest = export.export_vgg_weights(checkpoint, out)
        from photostyle import vgg

        model = vgg.load_weights(out)
        assert model.specs["conv1_1"].kernel.shape == (64, 3, 3, 3)
        assert len(manifest.layer_map) == 16
        assert (tmp_path / "w.vggw.manifest.json").exists()

    def test_reexport_byte_identical(self, checkpoint, tmp_path):
        a = tmp_path / "a.vggw"
        b = tmp_path / "b.vggw"
        export.export_vgg_weights(checkpoint, a)
        export.export_vgg_weights(checkpoint, b)
        assert a.read_bytes() == b.read_bytes()

    def test_missing_layer_reported(self, tmp_path):
        path = make_vgg19_checkpoint(tmp_path / "broken.pth")
        state = torch.load(path, weights_only=True)
        del state["features.34.weight"]  # conv5_4
        torch.save(state, path)
        with pytest.raises(ExportError) as exc:
            export.export_vgg_weights(path, tmp_path / "w.vggw")
        assert "conv5_4" in str(exc.value)

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(ExportError):
            export.export_vgg_weights(tmp_path / "nope.pth", tmp_path / "w.vggw")

    def test_mean_folding(self, checkpoint, tmp_path):
        out = tmp_path / "w.vggw"
        export.export_vgg_weights(checkpoint, out)
        from photostyle import vgg

        model = vgg.load_weights(out)
        np.testing.assert_allclose(
            model.mean, 255.0 * export.IMAGENET_MEAN, rtol=1e-6
        )


class TestActivations:
    def test_shapes_at_64px(self, checkpoint, test_image, tmp_path):
        out = tmp_path / "acts.npz"
        activations.emit_reference_activations(
            checkpoint, test_image, ["conv1_1"], out
        )
        data = np.load(out)
        assert data["conv1_1"].shape == (64, 64 * 64)
        assert data["image"].shape == (64, 64, 3)

    def test_zero_image_matches_engine(self, checkpoint, tmp_path):
        from PIL import Image

        from photostyle import vgg

        zero = tmp_path / "zero.png"
        Image.fromarray(np.zeros((32, 32, 3), np.uint8)).save(zero)
        out = tmp_path / "z.npz"
        activations.emit_reference_activations(checkpoint, zero, ["conv1_1"], out)
        data = np.load(out)

        weights = tmp_path / "w.vggw"
        export.export_vgg_weights(checkpoint, weights)
        model = vgg.load_weights(weights).astype(np.float64)
        caps = vgg.forward(
            model, vgg.preprocess(model, data["image"]), ["conv1_1"]
        )
        ref = data["conv1_1"]
        err = np.linalg.norm(caps["conv1_1"] - ref) / np.linalg.norm(ref)
        assert err < 1e-4

    def test_unknown_layer(self, checkpoint, test_image, tmp_path):
        with pytest.raises(ExportError):
            activations.emit_reference_activations(
                checkpoint, test_image, ["conv9_1"], tmp_path / "x.npz"
            )

    def test_missing_weights(self, test_image, tmp_path):
        with pytest.raises(ExportError):
            activations.emit_reference_activations(
                tmp_path / "none.pth", test_image, ["conv1_1"], tmp_path / "x.npz"
            )


@pytest.fixture(scope="module")
def seg_checkpoint(tmp_path_factory):
    torch.manual_seed(3)
    import torchvision.models.segmentation as seg_models

    model = seg_models.lraspp_mobilenet_v3_large(
        num_classes=150, weights=None, weights_backbone=None
    )
    path = tmp_path_factory.mktemp("seg") / "lraspp.pth"
    torch.save(model.state_dict(), path)
    return path


class TestGenerateSegmentation:
    def test_mask_and_palette_written(self, seg_checkpoint, test_image, tmp_path):
        mask, palette = segmentation.generate_segmentation(
            test_image,
            tmp_path / "mask.png",
            tmp_path / "palette.txt",
            checkpoint=seg_checkpoint,
            arch="lraspp_mobilenet_v3_large",
        )
        from PIL import Image

        with Image.open(mask) as m:
            assert m.size == (64, 64)
        assert palette.read_text().count("\n") >= 140

    def test_missing_checkpoint_is_actionable(self, test_image, tmp_path):
        with pytest.raises(ExportError) as exc:
            segmentation.generate_segmentation(
                test_image, tmp_path / "m.png", tmp_path / "p.txt", checkpoint=None
            )
        assert "hand-made masks" in str(exc.value)

    def test_palette_defects_repaired(self):
        palette = segmentation.repaired_palette()
        colors = [c for c, _ in palette]
        assert len(set(colors)) == len(colors)
        seen = set()
        for _, words in palette:
            assert not (set(words) & seen)
            seen |= set(words)
