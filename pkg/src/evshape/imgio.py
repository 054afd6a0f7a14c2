"""Binary PGM (P5) and PPM (P6) readers/writers.

Grayscale frames use 16-bit PGM, masks 8-bit {0,255}, event-frame images
24-bit PPM. Multi-byte samples are big-endian per the Netpbm convention.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError


def write_pgm(path, data: np.ndarray, maxval: int = 255) -> None:
    """Write (H,W) integer data as binary PGM; maxval 255 or 65535."""
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError("PGM data must be 2-D")
    if maxval == 255:
        payload = data.astype(np.uint8).tobytes()
    elif maxval == 65535:
        payload = data.astype(">u2").tobytes()
    else:
        raise ValueError("maxval must be 255 or 65535")
    header = f"P5\n{data.shape[1]} {data.shape[0]}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + payload)


def write_ppm(path, data: np.ndarray) -> None:
    """Write (H,W,3) uint8 data as binary PPM."""
    data = np.asarray(data, dtype=np.uint8)
    if data.ndim != 3 or data.shape[2] != 3:
        raise ValueError("PPM data must be (H,W,3)")
    header = f"P6\n{data.shape[1]} {data.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def _read_netpbm(path, magic: bytes):
    raw = Path(path).read_bytes()
    if not raw.startswith(magic):
        raise FormatError(f"{path}: expected {magic.decode()} magic")
    # Header: magic, width, height, maxval as whitespace/comment-separated tokens.
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated header")
        try:
            tokens.append(int(raw[start:pos]))
        except ValueError as exc:
            raise FormatError(f"{path}: bad header token") from exc
    pos += 1  # single whitespace after maxval
    width, height, maxval = tokens
    if width <= 0 or height <= 0 or maxval <= 0:
        raise FormatError(f"{path}: bad dimensions/maxval")
    return raw[pos:], width, height, maxval


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read binary PGM; returns ((H,W) int array, maxval)."""
    payload, width, height, maxval = _read_netpbm(path, b"P5")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    need = width * height * dtype.itemsize
    if len(payload) < need:
        raise FormatError(f"{path}: truncated pixel data")
    data = np.frombuffer(payload[:need], dtype=dtype).reshape(height, width)
    return data.astype(np.int64 if maxval > 255 else np.uint8), maxval


def read_ppm(path) -> np.ndarray:
    """Read binary 8-bit PPM; returns (H,W,3) uint8."""
    payload, width, height, maxval = _read_netpbm(path, b"P6")
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PPM supported")
    need = width * height * 3
    if len(payload) < need:
        raise FormatError(f"{path}: truncated pixel data")
    return np.frombuffer(payload[:need], dtype=np.uint8).reshape(height, width, 3).copy()
