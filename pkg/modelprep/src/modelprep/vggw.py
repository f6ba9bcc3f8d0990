"""Writer for the engine's VGGW weight file format.

Layout (little-endian): magic ``VGGW``, version u32, channel mean
3 x f32, then per conv layer: name length u16 + UTF-8 name, kernel dims
4 x u32 (out, in, kh, kw), kernel f32, bias length u32, bias f32.
"""

import struct

import numpy as np

MAGIC = b"VGGW"
VERSION = 1

CONV_LAYERS = [
    ("conv1_1", 3, 64),
    ("conv1_2", 64, 64),
    ("conv2_1", 64, 128),
    ("conv2_2", 128, 128),
    ("conv3_1", 128, 256),
    ("conv3_2", 256, 256),
    ("conv3_3", 256, 256),
    ("conv3_4", 256, 256),
    ("conv4_1", 256, 512),
    ("conv4_2", 512, 512),
    ("conv4_3", 512, 512),
    ("conv4_4", 512, 512),
    ("conv5_1", 512, 512),
    ("conv5_2", 512, 512),
    ("conv5_3", 512, 512),
    ("conv5_4", 512, 512),
]


def write(path, layers, mean):
    """Write ``layers`` (name -> (kernel, bias) float32 arrays) as VGGW."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(np.asarray(mean, dtype="<f4").tobytes())
        for name, cin, cout in CONV_LAYERS:
            kernel, bias = layers[name]
            if kernel.shape != (cout, cin, 3, 3):
                raise ValueError(
                    f"{name}: kernel shape {kernel.shape}, expected {(cout, cin, 3, 3)}"
                )
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<4I", *kernel.shape))
            fh.write(np.ascontiguousarray(kernel, dtype="<f4").tobytes())
            fh.write(struct.pack("<I", bias.shape[0]))
            fh.write(np.ascontiguousarray(bias, dtype="<f4").tobytes())
