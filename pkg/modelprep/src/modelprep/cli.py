"""Command line for the offline tooling.

Subcommands: export-weights, emit-activations, generate-seg.
"""

import argparse
import sys

from .activations import emit_reference_activations
from .export import ExportError, export_vgg_weights
from .segmentation import ARCHITECTURES, generate_segmentation


def build_parser():
    parser = argparse.ArgumentParser(prog="modelprep")
    sub = parser.add_subparsers(dest="command", required=True)

    exp = sub.add_parser("export-weights", help="checkpoint -> VGGW weight file")
    exp.add_argument("--source", required=True,
                     help="state_dict path or 'torchvision:vgg19'")
    exp.add_argument("--out", required=True)

    act = sub.add_parser("emit-activations", help="reference activation npz")
    act.add_argument("--checkpoint", required=True)
    act.add_argument("--image", required=True)
    act.add_argument("--layers", default="conv1_1,conv4_2",
                     help="comma-separated conv layer names")
    act.add_argument("--out", required=True)

    gen = sub.add_parser("generate-seg", help="photo -> mask + palette files")
    gen.add_argument("--image", required=True)
    gen.add_argument("--out-mask", required=True)
    gen.add_argument("--out-palette", required=True)
    gen.add_argument("--checkpoint", default=None)
    gen.add_argument("--arch", default="fcn_resnet50", choices=ARCHITECTURES)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export-weights":
            manifest = export_vgg_weights(args.source, args.out)
            print(f"wrote {args.out} (sha256 {manifest.output_digest[:16]}...)")
        elif args.command == "emit-activations":
            layers = [l.strip() for l in args.layers.split(",") if l.strip()]
            emit_reference_activations(args.checkpoint, args.image, layers, args.out)
            print(f"wrote {args.out} ({', '.join(layers)})")
        else:
            mask, palette = generate_segmentation(
                args.image, args.out_mask, args.out_palette,
                checkpoint=args.checkpoint, arch=args.arch,
            )
            print(f"wrote {mask} and {palette}")
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
