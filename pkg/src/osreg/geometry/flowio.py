"""Binary flow-field codec and small raster helpers.

Flow file layout (little-endian): 4-byte magic "GFLW", uint32 height, uint32
width, then H*W*2 float32 values row-major with x and y interleaved per
pixel, then H*W validity bytes (0 or 1).
"""

from __future__ import annotations

import struct

import numpy as np

from .flow import FlowField

MAGIC = b"GFLW"


def write_flow(path, flow: FlowField) -> None:
    h, w = flow.shape
    data = np.ascontiguousarray(flow.data, dtype="<f4")
    valid = np.ascontiguousarray(flow.valid, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", h, w))
        f.write(data.tobytes())
        f.write(valid.tobytes())


def read_flow(path) -> FlowField:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ValueError(f"bad flow file magic {magic!r}")
        h, w = struct.unpack("<II", f.read(8))
        data = np.frombuffer(f.read(h * w * 2 * 4), dtype="<f4").reshape(h, w, 2)
        valid = np.frombuffer(f.read(h * w), dtype=np.uint8).reshape(h, w)
        trailing = f.read()
    if trailing:
        raise ValueError(f"{len(trailing)} unexpected trailing bytes in flow file")
    return FlowField(data.astype(np.float64), valid.astype(bool))
