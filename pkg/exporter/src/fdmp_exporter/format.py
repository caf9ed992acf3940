"""FDMP writer, independent of the consumer side.

Layout (little-endian): magic "FDMP", version u16=1, flags u16 (bit0 labels,
bit1 coords), n u64, d u32, C u32, height u32, width u32, domain u8
(0=LI, 1=HI); then n*d float32 features, n*C float32 probs, optional n uint16
labels (0xFFFF = unlabeled), optional n*2 uint32 row-major coords.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"FDMP"
VERSION = 1
FLAG_LABELS = 0x1
FLAG_COORDS = 0x2
LABEL_SENTINEL = 0xFFFF

_HEADER = struct.Struct("<4sHHQIIIIB")
_DOMAIN_CODE = {"LI": 0, "HI": 1}


def write_fdmp(
    path,
    features: np.ndarray,
    probs: np.ndarray,
    labels: np.ndarray | None = None,
    domain: str = "LI",
    height: int = 0,
    width: int = 0,
) -> None:
    """Write one flattened record block; grid files carry row-major coords."""
    n, d = features.shape
    n_classes = probs.shape[1]
    flags = 0
    if labels is not None:
        flags |= FLAG_LABELS
    if height > 0:
        flags |= FLAG_COORDS
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(MAGIC, VERSION, flags, n, d, n_classes, height, width, _DOMAIN_CODE[domain])
        )
        fh.write(np.ascontiguousarray(features, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(probs, dtype="<f4").tobytes())
        if labels is not None:
            stored = np.asarray(labels, dtype=np.int64).copy()
            stored[stored < 0] = LABEL_SENTINEL
            fh.write(np.ascontiguousarray(stored, dtype="<u2").tobytes())
        if height > 0:
            rows, cols = np.divmod(np.arange(n, dtype=np.uint32), np.uint32(width))
            fh.write(np.ascontiguousarray(np.stack([rows, cols], axis=1), dtype="<u4").tobytes())
