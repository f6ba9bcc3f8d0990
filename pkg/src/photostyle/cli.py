"""Command-line entry point: validate inputs, group, precompute, optimize.

Exit codes: 0 success, 2 usage/validation, 3 input data error,
4 memory-limit refusal, 5 numerical failure.
"""

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import data as shipped
from . import losses, matting, optimize, segmentation, semantics, vgg
from .errors import (
    InputError,
    MemoryLimitError,
    NumericalError,
    PhotostyleError,
)
from .images import load_image, save_image

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_MEMORY = 4
EXIT_NUMERICAL = 5


@dataclass
class JobSpec:
    content: Path
    style: Path
    content_seg: Path
    style_seg: Path
    weights: Path
    out: Path
    palette: Path
    taxonomy: Path
    substitutions: Path
    theta: float = 0.6
    init: str = "content"
    seed: int = 0
    content_weight: float = 1.0
    style_weight: float = 100.0
    photorealism_weight: float = 10000.0
    assessment_weight: float = 100000.0
    iterations: int = 2000
    max_dim: int = 700
    laplacian_cache: Path = None
    checkpoint_every: int = 100


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    parser = _Parser(
        prog="photostyle",
        description="Photorealistic style transfer with semantic grouping.",
    )
    parser.add_argument("--content", required=True, type=Path, help="content photo")
    parser.add_argument("--style", required=True, type=Path, help="style reference photo")
    parser.add_argument("--content-seg", required=True, type=Path, help="content mask image")
    parser.add_argument("--style-seg", required=True, type=Path, help="style mask image")
    parser.add_argument("--weights", required=True, type=Path, help="VGGW weight file")
    parser.add_argument("--out", required=True, type=Path, help="output image path")
    parser.add_argument("--palette", type=Path, default=shipped.PALETTE)
    parser.add_argument("--taxonomy", type=Path, default=shipped.TAXONOMY)
    parser.add_argument("--substitutions", type=Path, default=shipped.SUBSTITUTIONS)
    parser.add_argument("--theta", type=float, default=0.6, help="semantic threshold")
    parser.add_argument(
        "--init", choices=("content", "style", "noise"), default="content"
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--content-weight", type=float, default=1.0)
    parser.add_argument("--style-weight", type=float, default=100.0)
    parser.add_argument("--photorealism-weight", type=float, default=10000.0)
    parser.add_argument("--assessment-weight", type=float, default=100000.0)
    parser.add_argument("--iterations", type=int, default=2000)
    parser.add_argument(
        "--max-dim",
        type=int,
        default=700,
        help="largest accepted image extent; raise explicitly to acknowledge the memory cost",
    )
    parser.add_argument("--laplacian-cache", type=Path, default=None)
    parser.add_argument("--checkpoint-every", type=int, default=100)
    return parser


def parse_and_validate(argv):
    args = build_parser().parse_args(argv)
    spec = JobSpec(
        content=args.content,
        style=args.style,
        content_seg=args.content_seg,
        style_seg=args.style_seg,
        weights=args.weights,
        out=args.out,
        palette=args.palette,
        taxonomy=args.taxonomy,
        substitutions=args.substitutions,
        theta=args.theta,
        init=args.init,
        seed=args.seed,
        content_weight=args.content_weight,
        style_weight=args.style_weight,
        photorealism_weight=args.photorealism_weight,
        assessment_weight=args.assessment_weight,
        iterations=args.iterations,
        max_dim=args.max_dim,
        laplacian_cache=args.laplacian_cache,
        checkpoint_every=args.checkpoint_every,
    )
    problems = []
    for name in ("content", "style", "content_seg", "style_seg", "weights",
                 "palette", "taxonomy", "substitutions"):
        path = getattr(spec, name)
        if not path.exists():
            problems.append(f"--{name.replace('_', '-')}: file not found: {path}")
    if not 0.0 <= spec.theta <= 1.0:
        problems.append(f"--theta must be in [0, 1], got {spec.theta}")
    if spec.iterations < 0:
        problems.append(f"--iterations must be >= 0, got {spec.iterations}")
    if spec.max_dim < 3:
        problems.append(f"--max-dim must be at least 3, got {spec.max_dim}")
    if any(
        w < 0
        for w in (
            spec.content_weight,
            spec.style_weight,
            spec.photorealism_weight,
            spec.assessment_weight,
        )
    ):
        problems.append("loss weights must be nonnegative")
    if problems:
        for p in problems:
            print(f"error: {p}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    return spec


def _artifact_paths(out):
    stem = out.with_suffix("")
    return {
        "losses": Path(f"{stem}_losses.csv"),
        "preview": Path(f"{stem}_segmentation.png"),
    }


def _combined_preview(content_render, style_render):
    gap = 4
    h = max(content_render.shape[0], style_render.shape[0])
    w = content_render.shape[1] + gap + style_render.shape[1]
    canvas = np.zeros((h, w, 3), dtype=np.uint8)
    canvas[: content_render.shape[0], : content_render.shape[1]] = content_render
    canvas[: style_render.shape[0], content_render.shape[1] + gap :] = style_render
    return canvas


def execute(job):
    """Run a validated job; writes the output image, loss CSV and preview."""
    model = vgg.load_weights(job.weights)
    subs = semantics.load_substitutions(job.substitutions)
    taxonomy = semantics.Taxonomy.from_file(job.taxonomy)
    palette = segmentation.repair_palette(
        segmentation.load_palette(job.palette, subs)
    )

    content = load_image(job.content)
    style = load_image(job.style)
    for name, img in (("content", content), ("style", style)):
        largest = max(img.shape[0], img.shape[1])
        if largest > job.max_dim:
            raise MemoryLimitError(
                f"{name} image extent {largest}px exceeds the {job.max_dim}px limit; "
                "Laplacian construction at this size is extremely memory-hungry "
                "(about 700px is the practical ceiling on an 8 GB machine). "
                "Resize the input or raise --max-dim to acknowledge the cost."
            )

    content_map = segmentation.load_segmentation(job.content_seg, palette)
    style_map = segmentation.load_segmentation(job.style_seg, palette)
    if (content_map.height, content_map.width) != content.shape[:2]:
        raise InputError(
            f"content mask is {content_map.height}x{content_map.width}, "
            f"image is {content.shape[0]}x{content.shape[1]}"
        )
    if (style_map.height, style_map.width) != style.shape[:2]:
        raise InputError(
            f"style mask is {style_map.height}x{style_map.width}, "
            f"image is {style.shape[0]}x{style.shape[1]}"
        )

    grouping = semantics.group_semantics(
        taxonomy, content_map.classes, style_map.classes, job.theta
    )
    content_map = content_map.relabel(grouping.content_mapping)
    style_map = style_map.relabel(grouping.style_mapping)

    config = losses.LossConfig.defaults(
        content_weight=job.content_weight,
        style_weight=job.style_weight,
        photorealism_weight=job.photorealism_weight,
        assessment_weight=job.assessment_weight,
        semantic_threshold=job.theta,
    )
    layers = config.layers()

    # classes must line up across the two pyramids for the style loss
    order = {cls: i for i, cls in enumerate(grouping.classes)}
    def ordered_masks(segmap):
        masks = segmentation.binary_masks(segmap)
        out = np.zeros((len(grouping.classes),) + masks.shape[1:], masks.dtype)
        for i, cls in enumerate(segmap.classes):
            out[order[cls]] = masks[i]
        return out

    pyramid_content = segmentation.build_mask_pyramid(
        ordered_masks(content_map), layers, grouping.classes
    )
    pyramid_style = segmentation.build_mask_pyramid(
        ordered_masks(style_map), layers, grouping.classes
    )

    content_capture = vgg.forward(
        model, vgg.preprocess(model, content), list(config.content_weights)
    )
    style_capture = vgg.forward(
        model, vgg.preprocess(model, style), list(config.style_weights)
    )

    laplacian = None
    if config.photorealism_weight > 0:
        laplacian = matting.load_or_build(content, cache_dir=job.laplacian_cache)

    pre = losses.Precomputed(
        model=model,
        content_capture=content_capture,
        style_capture=style_capture,
        pyramid_content=pyramid_content,
        pyramid_style=pyramid_style,
        laplacian=laplacian,
        scorer=losses.ToyScorer(),
    )

    artifacts = _artifact_paths(job.out)
    job.out.parent.mkdir(parents=True, exist_ok=True)
    suffix = job.out.suffix or ".png"
    stem = job.out.with_suffix("")

    def write_checkpoint(t, image):
        save_image(image, Path(f"{stem}_iter{t}{suffix}"))

    log_lines = []
    run_job = optimize.RunJob(
        content=content,
        style=style,
        precomputed=pre,
        config=config,
        iterations=job.iterations,
        init_mode=job.init,
        seed=job.seed,
        checkpoint_every=job.checkpoint_every,
        checkpoint_writer=write_checkpoint,
        log_writer=log_lines.append,
    )
    final, reports = optimize.run(run_job)

    save_image(final, job.out)
    artifacts["losses"].write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    preview = _combined_preview(
        segmentation.render_segmentation(content_map, palette),
        segmentation.render_segmentation(style_map, palette),
    )
    save_image(preview.astype(np.float32) / 255.0, artifacts["preview"])
    print(
        f"wrote {job.out}, {artifacts['losses']}, {artifacts['preview']} "
        f"(final loss {reports[-1].total:.6g})"
    )
    return EXIT_OK


def main(argv=None):
    try:
        job = parse_and_validate(argv if argv is not None else sys.argv[1:])
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE

    try:
        return execute(job)
    except MemoryLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MEMORY
    except MemoryError:
        print(
            "error: out of memory; the Laplacian and feature buffers grow "
            "quadratically with image size (about 700px is the practical "
            "ceiling on an 8 GB machine). Use smaller inputs or --max-dim.",
            file=sys.stderr,
        )
        return EXIT_MEMORY
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PhotostyleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
