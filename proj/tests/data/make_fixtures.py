"""Regenerates the binary fixtures in this directory."""
import pathlib
import struct

import numpy as np
from skimage import data, io, transform

here = pathlib.Path(__file__).resolve().parent


def emb1(records, dim):
    out = bytearray(b"EMB1" + struct.pack("<III", 1, len(records), dim))
    for name, values in records:
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<%df" % dim, *values)
    return bytes(out)


def fmp1(records):
    out = bytearray(b"FMP1" + struct.pack("<III", 1, len(records), 0))
    for name, layer, c, h, w, values in records:
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<HHHH", layer, c, h, w)
        out += struct.pack("<%df" % (c * h * w), *values)
    return bytes(out)


(here / "golden.emb").write_bytes(emb1(
    [("img00", [1.0, -0.5, 0.25, 3.0]),
     ("img01/02", [0.0, 1e-3, -7.5, 0.125]),
     ("café", [2.5, 2.5, -2.5, 1.0 / 3.0])], 4))
(here / "empty.emb").write_bytes(emb1([], 8))
(here / "golden.fmp").write_bytes(fmp1(
    [("img00", 1, 2, 2, 3, [i * 0.5 - 1.0 for i in range(12)]),
     ("img00", 4, 1, 1, 2, [0.75, -0.25]),
     ("img01", 1, 2, 2, 3, [float(i * i) for i in range(12)])]))

photo = transform.resize(data.astronaut()[:384, :512], (192, 256), anti_aliasing=True)
io.imsave(here / "astronaut_192x256.png", (np.clip(photo, 0, 1) * 255 + 0.5).astype(np.uint8),
          check_contrast=False)
