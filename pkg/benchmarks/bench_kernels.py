#!/usr/bin/env python3
"""Compare the compiled kernel backend against the numpy fallback.

Times the gather/scatter kernels on VGG-shaped workloads, the matting
window kernel, and one full objective evaluation per backend.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import os
import sys
import time

import numpy as np

from photostyle import kernels


def timeit(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def bench_kernels(repeats):
    backends = kernels.backends()
    if "compiled" not in backends:
        print("compiled extension not built; nothing to compare")
        return

    rng = np.random.default_rng(0)
    cases = [
        ("im2col3 64x96x96 f32", "im2col3",
         (np.ascontiguousarray(rng.random((64, 96, 96), dtype=np.float32)),)),
        ("im2col3 512x24x24 f32", "im2col3",
         (np.ascontiguousarray(rng.random((512, 24, 24), dtype=np.float32)),)),
        ("col2im3 64x96x96 f32", "col2im3",
         (np.ascontiguousarray(rng.random((64 * 9, 96 * 96), dtype=np.float32)), 64, 96, 96)),
        ("maxpool2_fwd 128x48x48", "maxpool2_fwd",
         (np.ascontiguousarray(rng.random((128, 48, 48), dtype=np.float32)),)),
        ("matting 96x96 slab", "matting_values_slab",
         (np.ascontiguousarray(rng.random((96, 96, 3))), 1e-7, 0, 94)),
    ]

    print(f"{'kernel':28s} {'compiled':>10s} {'numpy':>10s} {'speedup':>8s}")
    for label, name, args in cases:
        t_ext = timeit(lambda: getattr(backends["compiled"], name)(*args), repeats)
        t_np = timeit(lambda: getattr(backends["numpy"], name)(*args), repeats)
        print(f"{label:28s} {t_ext:8.2f}ms {t_np:8.2f}ms {t_np / t_ext:7.1f}x")


def bench_objective(repeats):
    """One full loss+gradient evaluation at 96x96 per backend."""
    script = os.path.abspath(__file__)
    print(f"\n{'objective eval 96x96':28s}", end="", flush=True)
    times = {}
    for backend, env in (("compiled", "0"), ("numpy", "1")):
        t = _objective_once_subprocess(script, env, repeats)
        times[backend] = t
        print(f" {t:8.2f}ms", end="", flush=True)
    print(f" {times['numpy'] / times['compiled']:7.1f}x")


def _objective_once_subprocess(script, force_numpy, repeats):
    import subprocess

    env = dict(os.environ, PHOTOSTYLE_FORCE_NUMPY=force_numpy)
    out = subprocess.run(
        [sys.executable, script, "--objective-probe", "--repeats", str(repeats)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return float(out.stdout.strip().splitlines()[-1])


def objective_probe(repeats):
    from photostyle import losses, matting, segmentation, vgg
    from photostyle.tensor_ops import ConvSpec

    gen = np.random.default_rng(7)
    specs = {}
    for name, cin, cout in vgg.CONV_LAYERS:
        scale = np.sqrt(2.0 / (cin * 9))
        specs[name] = ConvSpec(
            (gen.standard_normal((cout, cin, 3, 3)) * scale).astype(np.float32),
            gen.uniform(-0.05, 0.05, cout).astype(np.float32),
        )
    model = vgg.VggModel(specs, np.array([123.68, 116.779, 103.939], np.float32))

    content = gen.random((96, 96, 3)).astype(np.float32)
    style = gen.random((96, 96, 3)).astype(np.float32)
    config = losses.LossConfig.defaults()
    masks = np.zeros((2, 96, 96), np.float32)
    masks[0, :48] = 1.0
    masks[1, 48:] = 1.0
    pyramid = segmentation.build_mask_pyramid(masks, config.layers(), ["a", "b"])
    pre = losses.Precomputed(
        model=model,
        content_capture=vgg.forward(model, vgg.preprocess(model, content),
                                    list(config.content_weights)),
        style_capture=vgg.forward(model, vgg.preprocess(model, style),
                                  list(config.style_weights)),
        pyramid_content=pyramid,
        pyramid_style=pyramid,
        laplacian=matting.build_matting_laplacian(content),
        scorer=losses.ToyScorer(),
    )
    print(timeit(lambda: losses.total_loss(content, pre, config), repeats))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--objective-probe", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.objective_probe:
        objective_probe(args.repeats)
        return
    print(f"active backend: {kernels.BACKEND}")
    bench_kernels(args.repeats)
    bench_objective(args.repeats)


if __name__ == "__main__":
    main()
