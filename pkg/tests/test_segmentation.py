"""Palette repair, mask loading, binary masks and mask pyramids."""

import numpy as np
import pytest
from PIL import Image

from photostyle import data as shipped
from photostyle import segmentation as seg
from photostyle import semantics, vgg
from photostyle.errors import InputError, PaletteError, UnknownColorError

SKY = (6, 230, 230)
SEA = (9, 7, 230)
SAND = (255, 230, 120)


def make_palette(*entries):
    return seg.Palette([seg.PaletteEntry(c, frozenset(w)) for c, w in entries])


class TestRepairPalette:
    def test_duplicate_color_unions_words(self):
        raw = make_palette(
            ((140, 140, 140), ["skyscraper"]),
            ((140, 140, 140), ["road", "route"]),
        )
        repaired = seg.repair_palette(raw)
        assert len(repaired) == 1
        assert repaired.entries[0].color == (140, 140, 140)
        assert repaired.entries[0].words == {"skyscraper", "road", "route"}

    def test_unique_palette_unchanged(self):
        raw = make_palette((SKY, ["sky"]), (SEA, ["sea"]))
        repaired = seg.repair_palette(raw)
        assert [e.color for e in repaired.entries] == [SKY, SEA]
        assert [e.words for e in repaired.entries] == [
            frozenset({"sky"}),
            frozenset({"sea"}),
        ]

    def test_duplicate_class_keeps_first_color(self):
        raw = make_palette(
            ((1, 2, 3), ["ground"]),
            ((4, 5, 6), ["ground"]),
        )
        repaired = seg.repair_palette(raw)
        assert len(repaired) == 1
        assert repaired.entries[0].color == (1, 2, 3)

    def test_shared_word_merges_transitively(self):
        raw = make_palette(
            ((1, 0, 0), ["earth", "ground"]),
            ((0, 1, 0), ["land", "ground", "soil"]),
        )
        repaired = seg.repair_palette(raw)
        assert len(repaired) == 1
        assert repaired.entries[0].words == {"earth", "ground", "land", "soil"}
        assert repaired.entries[0].color == (1, 0, 0)

    def test_idempotent(self):
        raw = make_palette(
            ((1, 0, 0), ["a", "b"]),
            ((0, 1, 0), ["b", "c"]),
            ((0, 1, 0), ["d"]),
        )
        once = seg.repair_palette(raw)
        twice = seg.repair_palette(once)
        assert [e.color for e in once.entries] == [e.color for e in twice.entries]
        assert [e.words for e in once.entries] == [e.words for e in twice.entries]
        assert once.is_repaired()

    def test_empty_rejected(self):
        with pytest.raises(PaletteError):
            seg.repair_palette(seg.Palette([]))

    def test_shipped_palette_repairs(self):
        subs = semantics.load_substitutions(shipped.SUBSTITUTIONS)
        raw = seg.load_palette(shipped.PALETTE, subs)
        assert len(raw) == 150
        repaired = seg.repair_palette(raw)
        assert repaired.is_repaired()
        assert len(repaired) < 150


def write_mask(path, array):
    Image.fromarray(array.astype(np.uint8)).save(path)


@pytest.fixture
def beach_palette():
    return seg.repair_palette(
        make_palette((SKY, ["sky"]), (SEA, ["sea"]), (SAND, ["sand"]))
    )


@pytest.fixture
def beach_mask(tmp_path, beach_palette):
    arr = np.zeros((12, 10, 3), np.uint8)
    arr[:4] = SKY
    arr[4:8] = SEA
    arr[8:] = SAND
    path = tmp_path / "beach_seg.png"
    write_mask(path, arr)
    return path


class TestLoadSegmentation:
    def test_uniform_image_single_class(self, tmp_path, beach_palette):
        arr = np.zeros((6, 6, 3), np.uint8)
        arr[:] = SKY
        path = tmp_path / "sky.png"
        write_mask(path, arr)
        segmap = seg.load_segmentation(path, beach_palette)
        assert segmap.classes == [frozenset({"sky"})]
        assert np.all(segmap.indices == 0)

    def test_beach_classes(self, beach_mask, beach_palette):
        segmap = seg.load_segmentation(beach_mask, beach_palette)
        assert set(segmap.classes) == {
            frozenset({"sky"}),
            frozenset({"sea"}),
            frozenset({"sand"}),
        }

    def test_unknown_color_reports_position(self, tmp_path, beach_palette):
        arr = np.zeros((5, 5, 3), np.uint8)
        arr[:] = SKY
        arr[3, 2] = (1, 2, 3)
        path = tmp_path / "bad.png"
        write_mask(path, arr)
        with pytest.raises(UnknownColorError) as exc:
            seg.load_segmentation(path, beach_palette)
        assert exc.value.color == (1, 2, 3)
        assert exc.value.position == (2, 3)

    def test_lossy_format_rejected(self, beach_palette, tmp_path):
        path = tmp_path / "mask.jpg"
        write_mask(path, np.zeros((4, 4, 3)))
        with pytest.raises(InputError):
            seg.load_segmentation(path, beach_palette)

    def test_unrepaired_palette_rejected(self, beach_mask):
        broken = make_palette((SKY, ["sky"]), (SEA, ["sky"]))
        with pytest.raises(PaletteError):
            seg.load_segmentation(beach_mask, broken)

    def test_render_round_trip(self, beach_mask, beach_palette):
        segmap = seg.load_segmentation(beach_mask, beach_palette)
        rendered = seg.render_segmentation(segmap, beach_palette)
        with Image.open(beach_mask) as img:
            original = np.asarray(img.convert("RGB"))
        np.testing.assert_array_equal(rendered, original)

    def test_render_merged_class_uses_contained_color(self, beach_palette):
        segmap = seg.SegmentationMap(
            np.zeros((3, 3), np.int32), [frozenset({"sea", "sky"})]
        )
        rendered = seg.render_segmentation(segmap, beach_palette)
        # 'sea' < 'sky' canonically
        assert tuple(rendered[0, 0]) == SEA


class TestRelabel:
    def test_merges_indices(self, beach_mask, beach_palette):
        segmap = seg.load_segmentation(beach_mask, beach_palette)
        merged = frozenset({"sea", "sand"})
        mapping = {
            frozenset({"sea"}): merged,
            frozenset({"sand"}): merged,
        }
        out = segmap.relabel(mapping)
        assert set(out.classes) == {frozenset({"sky"}), merged}
        masks = seg.binary_masks(out)
        assert masks.shape[0] == 2
        np.testing.assert_allclose(masks.sum(axis=0), 1.0)


class TestBinaryMasks:
    def test_single_class_all_ones(self):
        segmap = seg.SegmentationMap(np.zeros((4, 5), np.int32), [frozenset({"sky"})])
        masks = seg.binary_masks(segmap)
        np.testing.assert_array_equal(masks, np.ones((1, 4, 5), np.float32))

    def test_two_class_complement(self):
        idx = np.zeros((4, 6), np.int32)
        idx[:, 3:] = 1
        segmap = seg.SegmentationMap(idx, [frozenset({"a"}), frozenset({"b"})])
        masks = seg.binary_masks(segmap)
        np.testing.assert_array_equal(masks[0] + masks[1], np.ones((4, 6)))

    def test_one_hot_against_indices(self, beach_mask, beach_palette):
        segmap = seg.load_segmentation(beach_mask, beach_palette)
        masks = seg.binary_masks(segmap)
        for k in range(len(segmap.classes)):
            np.testing.assert_array_equal(masks[k] == 1.0, segmap.indices == k)
        np.testing.assert_allclose(masks.sum(axis=0), 1.0)


LAYERS = ("conv1_1", "conv2_1", "conv3_1", "conv4_1", "conv5_1")


class TestMaskPyramid:
    def test_all_ones_preserved(self):
        masks = np.ones((1, 32, 32), np.float32)
        pyr = seg.build_mask_pyramid(masks, LAYERS)
        for layer in LAYERS:
            np.testing.assert_allclose(pyr.levels[layer], 1.0)

    def test_checkerboard_halves_to_half(self):
        masks = np.indices((8, 8)).sum(axis=0) % 2
        pyr = seg.build_mask_pyramid(masks[None].astype(np.float32), ["conv2_1"])
        np.testing.assert_allclose(pyr.levels["conv2_1"], 0.5)

    def test_partition_of_unity_all_levels(self, rng):
        idx = rng.integers(0, 4, size=(37, 41))
        masks = np.stack([(idx == k).astype(np.float32) for k in range(4)])
        pyr = seg.build_mask_pyramid(masks, LAYERS)
        for layer in LAYERS:
            total = pyr.levels[layer].sum(axis=0)
            np.testing.assert_allclose(total, 1.0, atol=1e-5)

    def test_grids_match_feature_extractor(self, vgg_model, rng):
        img = rng.random((37, 41, 3)).astype(np.float32)
        caps = vgg.forward(vgg_model, vgg.preprocess(vgg_model, img), LAYERS)
        masks = np.ones((1, 37, 41), np.float32)
        pyr = seg.build_mask_pyramid(masks, LAYERS)
        for layer in LAYERS:
            assert pyr.levels[layer].shape[1:] == caps.grids[layer]

    def test_values_stay_in_unit_interval(self, rng):
        masks = rng.random((3, 20, 20)).astype(np.float32)
        pyr = seg.build_mask_pyramid(masks, LAYERS)
        for layer in LAYERS:
            level = pyr.levels[layer]
            assert np.all(level >= 0.0) and np.all(level <= 1.0)
