"""Minimal image I/O: PNG through Pillow, PPM/PGM written by hand.

The netpbm writers emit a fixed header layout so identical pixels always give
identical files; tests hash their output.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image


class ImageFormatError(ValueError):
    pass


def _parse_netpbm_header(data: bytes, expected_magic: bytes) -> tuple[int, int, int, int]:
    """Return (width, height, maxval, data_offset) for a P5/P6 file."""
    if data[:2] != expected_magic:
        raise ImageFormatError(f"bad netpbm magic {data[:2]!r}, expected {expected_magic!r}")
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise ImageFormatError("truncated netpbm header")
        ch = data[pos : pos + 1]
        if ch == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise ImageFormatError("unterminated netpbm comment")
            pos = nl + 1
        elif ch.isspace():
            pos += 1
        else:
            m = re.match(rb"\d+", data[pos:])
            if m is None:
                raise ImageFormatError(f"bad netpbm header token at byte {pos}")
            fields.append(int(m.group()))
            pos += m.end()
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise ImageFormatError("missing separator before netpbm raster")
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ImageFormatError(f"bad netpbm extent {width}x{height}")
    if maxval != 255:
        raise ImageFormatError(f"only maxval 255 is supported, got {maxval}")
    return width, height, maxval, pos


def read_ppm(data: bytes) -> np.ndarray:
    width, height, _, pos = _parse_netpbm_header(data, b"P6")
    need = width * height * 3
    raster = data[pos : pos + need]
    if len(raster) != need:
        raise ImageFormatError(f"PPM raster has {len(raster)} bytes, expected {need}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3).copy()


def read_pgm(data: bytes) -> np.ndarray:
    width, height, _, pos = _parse_netpbm_header(data, b"P5")
    need = width * height
    raster = data[pos : pos + need]
    if len(raster) != need:
        raise ImageFormatError(f"PGM raster has {len(raster)} bytes, expected {need}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def ppm_bytes(img: np.ndarray) -> bytes:
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ImageFormatError(f"PPM writer needs uint8 (H, W, 3), got {img.dtype} {img.shape}")
    h, w = img.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def pgm_bytes(img: np.ndarray) -> bytes:
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ImageFormatError(f"PGM writer needs uint8 (H, W), got {img.dtype} {img.shape}")
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def read_image(path: str | Path) -> np.ndarray:
    """Load any supported image as uint8 (H, W, 3)."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"P6":
        return read_ppm(data)
    if data[:2] == b"P5":
        gray = read_pgm(data)
        return np.repeat(gray[..., None], 3, axis=-1)
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except Exception as e:  # Pillow raises various types for corrupt files
        raise ImageFormatError(f"cannot read image {path}: {e}") from None


def write_image(path: str | Path, img: np.ndarray, fmt: str | None = None) -> None:
    """Write uint8 (H, W, 3) as PNG or PPM, or (H, W) as PGM."""
    path = Path(path)
    if fmt is None:
        suffix = path.suffix.lower().lstrip(".")
        fmt = {"png": "png", "ppm": "ppm", "pgm": "pgm"}.get(suffix)
        if fmt is None:
            raise ImageFormatError(f"cannot infer format from {path.name!r}; pass fmt")
    if fmt == "ppm":
        path.write_bytes(ppm_bytes(img))
    elif fmt == "pgm":
        path.write_bytes(pgm_bytes(img))
    elif fmt == "png":
        if img.ndim == 2:
            Image.fromarray(img, mode="L").save(path, format="PNG")
        else:
            Image.fromarray(img, mode="RGB").save(path, format="PNG")
    else:
        raise ImageFormatError(f"unsupported format {fmt!r}")
