"""Scene-parsing inference producing palette-conformant mask files.

Runs a 150-class segmentation model from a local checkpoint, colors the
argmax classes with the repaired ADE20K palette, and writes the lossless
mask image plus the palette text file the engine consumes.
"""

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .ade20k import CLASSES
from .export import ExportError, IMAGENET_MEAN, IMAGENET_STD

ARCHITECTURES = ("fcn_resnet50", "lraspp_mobilenet_v3_large")


def repaired_palette():
    """(color, words) entries with unique colors and disjoint word sets.

    Entries sharing a color or any word merge into the earliest entry:
    duplicate colors union their word sets, duplicate classes keep the
    first color.
    """
    parent = list(range(len(CLASSES)))

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
    for i, (words, color) in enumerate(CLASSES):
        if color in by_color:
            union(by_color[color], i)
        else:
            by_color[color] = i
        for word in words:
            if word in by_word:
                union(by_word[word], i)
            else:
                by_word[word] = i

    groups = {}
    for i, (words, color) in enumerate(CLASSES):
        groups.setdefault(find(i), []).append(i)
    merged = []
    for root in sorted(groups):
        members = groups[root]
        words = []
        for i in members:
            for w in CLASSES[i][0]:
                if w not in words:
                    words.append(w)
        merged.append((CLASSES[members[0]][1], words))
    return merged


def class_color_table():
    """Class id (0-based) -> repaired color, honoring the merges."""
    palette = repaired_palette()
    color_of_word = {}
    for color, words in palette:
        for w in words:
            color_of_word[w] = color
    table = np.zeros((len(CLASSES), 3), dtype=np.uint8)
    for i, (words, _) in enumerate(CLASSES):
        table[i] = color_of_word[words[0]]
    return table


def write_palette(path):
    lines = [
        f"{c[0]},{c[1]},{c[2]}\t{';'.join(words)}" for c, words in repaired_palette()
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _build_model(arch, checkpoint):
    import torchvision.models.segmentation as seg_models

    if arch not in ARCHITECTURES:
        raise ExportError(f"unknown architecture {arch!r}; choose from {ARCHITECTURES}")
    if checkpoint is None:
        raise ExportError(
            "no scene-parsing checkpoint given; pass --checkpoint with a state_dict "
            f"for {arch} (num_classes=150). The transfer engine itself stays usable "
            "with hand-made masks."
        )
    path = Path(checkpoint)
    if not path.exists():
        raise ExportError(f"scene-parsing checkpoint not found: {checkpoint}")
    builder = getattr(seg_models, arch)
    model = builder(num_classes=150, weights=None, weights_backbone=None)
    state = torch.load(path, map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model


def generate_segmentation(image_path, out_mask_path, out_palette_path,
                          checkpoint=None, arch="fcn_resnet50"):
    """Segment a photo into ADE20K classes and write mask + palette files.

    The mask is a lossless color-indexed image of the photo's exact size
    using only repaired-palette colors.
    """
    model = _build_model(arch, checkpoint)
    with Image.open(image_path) as img:
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0

    x = torch.from_numpy(
        ((rgb - IMAGENET_MEAN) / IMAGENET_STD).transpose(2, 0, 1)[None]
    ).float()
    with torch.no_grad():
        logits = model(x)["out"][0].numpy()
    labels = np.argmax(logits, axis=0)

    colors = class_color_table()
    mask = colors[labels]
    out_mask_path = Path(out_mask_path)
    if out_mask_path.suffix.lower() in (".jpg", ".jpeg"):
        raise ExportError("mask output must be a lossless format, not JPEG")
    Image.fromarray(mask).save(out_mask_path)
    write_palette(out_palette_path)
    return out_mask_path, Path(out_palette_path)
