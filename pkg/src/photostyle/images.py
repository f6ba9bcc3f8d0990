"""Image file I/O and resizing.

Images cross module boundaries as (H, W, 3) float arrays in [0, 1].
"""

import numpy as np
from PIL import Image

from .errors import InputError


def load_image(path):
    """Load an RGB image as (H, W, 3) float32 in [0, 1]."""
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float32) / 255.0
    except FileNotFoundError:
        raise InputError(f"image file not found: {path}") from None
    except Exception as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc
    return arr


def save_image(arr, path):
    """Write an (H, W, 3) float array in [0, 1] as an 8-bit image file."""
    data = np.clip(np.asarray(arr), 0.0, 1.0)
    Image.fromarray((data * 255.0 + 0.5).astype(np.uint8)).save(path)


def resize_bilinear(img, out_h, out_w):
    """Classic 4-tap bilinear resize of (H, W, C) to (out_h, out_w, C).

    Half-pixel-center coordinate mapping; source samples are clamped at
    the borders.
    """
    img = np.asarray(img)
    h, w = img.shape[:2]
    if out_h <= 0 or out_w <= 0:
        raise InputError(f"invalid target size ({out_h}, {out_w})")
    sy = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    sx = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    fy = (sy - y0).astype(img.dtype)
    fx = (sx - x0).astype(img.dtype)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)

    top = img[y0c][:, x0c] * (1 - fx)[None, :, None] + img[y0c][:, x1c] * fx[None, :, None]
    bot = img[y1c][:, x0c] * (1 - fx)[None, :, None] + img[y1c][:, x1c] * fx[None, :, None]
    return top * (1 - fy)[:, None, None] + bot * fy[:, None, None]
