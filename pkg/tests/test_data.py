"""Invariants of the shipped palette, taxonomy, and substitution files."""

import numpy as np

from photostyle import data as shipped
from photostyle import segmentation, semantics


def load_all():
    subs = semantics.load_substitutions(shipped.SUBSTITUTIONS)
    tax = semantics.Taxonomy.from_file(shipped.TAXONOMY)
    raw = segmentation.load_palette(shipped.PALETTE, subs)
    return subs, tax, raw


class TestShippedData:
    def test_palette_size_and_repair(self):
        _, _, raw = load_all()
        assert len(raw) == 150
        repaired = segmentation.repair_palette(raw)
        assert repaired.is_repaired()
        # the dataset's known defects collapse a handful of entries
        assert 140 <= len(repaired) < 150

    def test_substitutions_closed(self):
        subs, _, _ = load_all()
        assert not [t for t in subs.values() if t in subs]

    def test_taxonomy_rooted_and_sized(self):
        _, tax, _ = load_all()
        assert tax.root == "entity"
        assert tax.depth("entity") == 1
        assert len(tax.words) > 180

    def test_every_palette_word_in_taxonomy(self):
        _, tax, raw = load_all()
        repaired = segmentation.repair_palette(raw)
        missing = sorted(
            {w for e in repaired.entries for w in e.words if w not in tax}
        )
        assert missing == []

    def test_known_color_collision_repaired(self):
        _, _, raw = load_all()
        repaired = segmentation.repair_palette(raw)
        merged = repaired.class_of((140, 140, 140))
        assert {"road", "skyscraper"} <= merged

    def test_water_words_group_at_default_threshold(self):
        _, tax, _ = load_all()
        groups, mapping = semantics.class_reduction(
            tax, [{"sea"}, {"lake"}, {"river"}, {"sky"}], 0.6
        )
        water = mapping[frozenset({"sea"})]
        assert {"sea", "lake", "river"} <= water
        assert mapping[frozenset({"sky"})] == frozenset({"sky"})

    def test_full_table_self_grouping(self):
        subs, tax, raw = load_all()
        repaired = segmentation.repair_palette(raw)
        classes = [e.words for e in repaired.entries]
        result = semantics.group_semantics(tax, classes, classes, 0.6)
        assert set(result.content_mapping.values()) == set(result.classes)
        assert len(result.classes) <= len(classes)
        # grouping at the default threshold merges a meaningful number
        assert len(result.classes) < len(classes)
