"""Color-coded segmentation masks, palette repair, and mask pyramids.

A palette maps colors to classes, where a class is a set of words. The
ADE20K palette shipped with the package carries the dataset's known
defects (one color used by two classes, several words assigned to
multiple colors); ``repair_palette`` merges those so that colors and
classes are unique before any mask is loaded.
"""

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import InputError, PaletteError, ShapeError, UnknownColorError
from .tensor_ops import avgpool2 as _avgpool2

_LOSSY_SUFFIXES = {".jpg", ".jpeg"}


def canonical_name(words):
    """Deterministic display/tie-break name of a class word-set."""
    return ";".join(sorted(words))


@dataclass(frozen=True)
class PaletteEntry:
    color: tuple
    words: frozenset


@dataclass
class Palette:
    """Ordered (color, class word-set) entries with bidirectional lookup."""

    entries: list

    def __post_init__(self):
        self._by_color = {e.color: i for i, e in enumerate(self.entries)}
        self._by_words = {e.words: i for i, e in enumerate(self.entries)}

    def __len__(self):
        return len(self.entries)

    def color_of(self, words):
        return self.entries[self._by_words[frozenset(words)]].color

    def class_of(self, color):
        return self.entries[self._by_color[tuple(color)]].words

    def is_repaired(self):
        colors = [e.color for e in self.entries]
        if len(set(colors)) != len(colors):
            return False
        seen = set()
        for e in self.entries:
            if e.words & seen:
                return False
            seen |= e.words
        return True


def _normalize(word, substitutions=None):
    word = word.strip().lower().replace(" ", "_")
    if substitutions:
        word = substitutions.get(word, word)
    return word


def load_palette(path, substitutions=None):
    """Parse a palette file: one ``R,G,B<TAB>word[;word...]`` entry per line.

    Words are normalized (lowercase, underscores) and run through the
    substitution map so the palette shares the taxonomy vocabulary.
    """
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                color_part, words_part = line.split("\t")
                color = tuple(int(v) for v in color_part.split(","))
                if len(color) != 3 or not all(0 <= v <= 255 for v in color):
                    raise ValueError(color)
                words = frozenset(
                    _normalize(w, substitutions) for w in words_part.split(";") if w.strip()
                )
                if not words:
                    raise ValueError("empty class")
            except ValueError as exc:
                raise PaletteError(f"{path}:{lineno}: malformed palette line ({exc})") from None
            entries.append(PaletteEntry(color, words))
    if not entries:
        raise PaletteError(f"palette file {path} has no entries")
    return Palette(entries)


def repair_palette(palette):
    """Merge duplicate colors (union word-sets) and duplicate classes.

    Entries are duplicates when they share a color or any class word;
    each merged group keeps the color of its earliest entry and the
    union of its words. Idempotent.
    """
    if not palette.entries:
        raise PaletteError("cannot repair an empty palette")
    parent = list(range(len(palette.entries)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    by_color = {}
    by_word = {}
    for i, entry in enumerate(palette.entries):
        if entry.color in by_color:
            union(by_color[entry.color], i)
        else:
            by_color[entry.color] = i
        for word in entry.words:
            if word in by_word:
                union(by_word[word], i)
            else:
                by_word[word] = i

    groups = {}
    for i, entry in enumerate(palette.entries):
        groups.setdefault(find(i), []).append(entry)
    merged = []
    for root in sorted(groups):
        members = groups[root]
        words = frozenset().union(*(m.words for m in members))
        merged.append(PaletteEntry(members[0].color, words))
    return Palette(merged)


@dataclass
class SegmentationMap:
    """Per-pixel class indices plus the table of classes present."""

    indices: np.ndarray  # (H, W) int32
    classes: list  # list of frozenset, indices point here

    @property
    def height(self):
        return self.indices.shape[0]

    @property
    def width(self):
        return self.indices.shape[1]

    def relabel(self, mapping):
        """New map with class sets replaced through ``mapping`` (word-set keyed).

        Classes mapping to the same target are collapsed into one index.
        """
        new_classes = []
        position = {}
        index_map = np.empty(len(self.classes), dtype=np.int32)
        for i, cls in enumerate(self.classes):
            target = mapping.get(cls, cls)
            if target not in position:
                position[target] = len(new_classes)
                new_classes.append(target)
            index_map[i] = position[target]
        return SegmentationMap(index_map[self.indices], new_classes)


def load_segmentation(path, palette):
    """Read a lossless color mask and map every pixel through the palette."""
    if not palette.is_repaired():
        raise PaletteError("load_segmentation requires a repaired palette")
    suffix = str(path)[str(path).rfind(".") :].lower()
    if suffix in _LOSSY_SUFFIXES:
        raise InputError(
            f"segmentation masks must be lossless, got {suffix} file: {path}"
        )
    with Image.open(path) as img:
        rgb = np.asarray(img.convert("RGB"))
    return segmentation_from_array(rgb, palette, source=str(path))


def segmentation_from_array(rgb, palette, source="<array>"):
    """Map an (H, W, 3) uint8 color array through a repaired palette."""
    h, w, _ = rgb.shape
    codes = (
        rgb[:, :, 0].astype(np.int32) << 16
        | rgb[:, :, 1].astype(np.int32) << 8
        | rgb[:, :, 2].astype(np.int32)
    )
    color_code = {
        (e.color[0] << 16 | e.color[1] << 8 | e.color[2]): i
        for i, e in enumerate(palette.entries)
    }
    unique = np.unique(codes)
    present = []
    for code in unique.tolist():
        if code not in color_code:
            ys, xs = np.nonzero(codes == code)
            raise UnknownColorError(
                (code >> 16 & 255, code >> 8 & 255, code & 255), int(xs[0]), int(ys[0])
            )
        present.append(color_code[code])
    present.sort()
    classes = [palette.entries[i].words for i in present]
    lookup = {
        (palette.entries[i].color[0] << 16)
        | (palette.entries[i].color[1] << 8)
        | palette.entries[i].color[2]: k
        for k, i in enumerate(present)
    }
    indices = np.zeros((h, w), dtype=np.int32)
    for code, k in lookup.items():
        indices[codes == code] = k
    return SegmentationMap(indices, classes)


def render_segmentation(segmap, palette):
    """Render class indices back to colors; inverse of loading.

    Merged classes (word-set unions) take the color of the contained
    palette class with the smallest canonical name.
    """
    color_table = np.zeros((len(segmap.classes), 3), dtype=np.uint8)
    for k, words in enumerate(segmap.classes):
        if words in palette._by_words:
            color_table[k] = palette.color_of(words)
            continue
        candidates = [e for e in palette.entries if e.words <= words]
        if not candidates:
            raise PaletteError(
                f"no palette entry matches class {canonical_name(words)!r}"
            )
        chosen = min(candidates, key=lambda e: canonical_name(e.words))
        color_table[k] = chosen.color
    return color_table[segmap.indices]


def binary_masks(segmap):
    """(n_classes, H, W) float32 one-hot masks; a partition of the image."""
    n = len(segmap.classes)
    masks = np.zeros((n, segmap.height, segmap.width), dtype=np.float32)
    for k in range(n):
        masks[k] = segmap.indices == k
    return masks


@dataclass
class MaskPyramid:
    """Per captured layer: (n_classes, h, w) soft masks on the layer's grid."""

    levels: dict
    classes: list = field(default_factory=list)

    def mask(self, layer, class_index):
        return self.levels[layer][class_index]




def build_mask_pyramid(masks, capture_layers, classes=None):
    """Average-pool full-resolution masks down to each captured layer's grid.

    The pool schedule mirrors the feature extractor: layer ``convB_x``
    sits after B-1 pools. Averaging preserves the partition of unity.
    """
    masks = np.asarray(masks, dtype=np.float32)
    if masks.ndim != 3:
        raise ShapeError("expected (n_classes, H, W) masks", got=masks.shape)
    depth = {}
    for name in capture_layers:
        if len(name) < 5 or not name.startswith("conv") or not name[4].isdigit():
            raise ShapeError(f"unknown layer name {name!r}")
        depth[name] = int(name[4]) - 1

    levels = {}
    current = masks
    pools_done = 0
    for name in sorted(depth, key=depth.get):
        while pools_done < depth[name]:
            current = _avgpool2(current)
            pools_done += 1
        levels[name] = current
    return MaskPyramid(levels, list(classes) if classes is not None else [])
