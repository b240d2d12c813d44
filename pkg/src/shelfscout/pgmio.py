"""Minimal Netpbm writers/readers for snapshots and dataset export."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def write_pgm(path, image: np.ndarray) -> None:
    """Write a P5 binary PGM. dtype uint8 or uint16 (big-endian on disk)."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("PGM image must be 2D")
    if img.dtype == np.uint8:
        maxval = 255
        payload = img.tobytes()
    elif img.dtype == np.uint16:
        maxval = 65535
        payload = img.astype(">u2").tobytes()
    else:
        raise ValueError("PGM image must be uint8 or uint16")
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode()
    Path(path).write_bytes(header + payload)


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != ord("\n"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    magic, width, height, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic != b"P5":
        raise ValueError("only binary PGM (P5) supported")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    img = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    return img.reshape(height, width).astype(np.uint16 if maxval > 255 else np.uint8)


def write_ppm(path, image: np.ndarray) -> None:
    """Write a P6 binary PPM from an (H, W, 3) uint8 array."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError("PPM image must be (H, W, 3) uint8")
    header = f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + img.tobytes())
