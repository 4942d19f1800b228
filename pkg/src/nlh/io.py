"""8-bit image codecs.

PGM (P5) and PPM (P6) are handled natively; PNG goes through Pillow. Every
writer stores ``round(clamp(v, 0, 1) * 255)``; every reader returns
``pixel / 255``. Grayscale images come back as 2-D planes, color images as
:class:`~nlh.image.ColorImage` in RGB.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .image import ColorImage, ColorSpace, ycbcr_to_rgb


def quantize(arr) -> np.ndarray:
    return np.rint(np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def _pnm_tokens(data: bytes, count: int):
    """Return ``count`` header tokens and the offset of the raster."""
    tokens = []
    pos = 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise ValueError("truncated PNM header")
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    return tokens, pos + 1


def read_pnm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, offset = _pnm_tokens(data, 4)
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: unsupported PNM type {magic!r} (need P5 or P6)")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PNM (maxval 255) is supported, got {maxval}")
    channels = 1 if magic == b"P5" else 3
    size = width * height * channels
    raster = np.frombuffer(data, dtype=np.uint8, count=size, offset=offset)
    if channels == 1:
        return raster.reshape(height, width)
    return raster.reshape(height, width, 3)


def write_pnm(path, pixels: np.ndarray):
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    if pixels.ndim == 2:
        magic = b"P5"
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot write array of shape {pixels.shape} as PNM")
    height, width = pixels.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (width, height))
        fh.write(pixels.tobytes())


def read_image(path):
    """Read a PGM/PPM/PNG file into [0, 1] data."""
    path = Path(path)
    if path.suffix.lower() in (".pgm", ".ppm", ".pnm"):
        pixels = read_pnm(path)
    else:
        with Image.open(path) as im:
            if im.mode in ("L", "P", "1", "I;16", "I"):
                if im.mode != "L":
                    im = im.convert("L")
            elif im.mode != "RGB":
                im = im.convert("RGB")
            pixels = np.asarray(im, dtype=np.uint8)
    values = pixels.astype(np.float64) / 255.0
    if values.ndim == 2:
        return values
    return ColorImage.from_hwc(values)


def write_image(path, img):
    """Write a plane, a ``(3, H, W)`` stack or a ColorImage (converted to RGB)."""
    path = Path(path)
    if isinstance(img, ColorImage):
        if img.space is not ColorSpace.RGB:
            img = ycbcr_to_rgb(img)
        pixels = quantize(img.to_hwc())
    else:
        arr = np.asarray(img, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[0] == 3:
            arr = np.moveaxis(arr, 0, -1)
        pixels = quantize(arr)
    if path.suffix.lower() in (".pgm", ".ppm", ".pnm"):
        if path.suffix.lower() == ".pgm" and pixels.ndim != 2:
            raise ValueError(f"{path}: PGM needs a grayscale image")
        if path.suffix.lower() == ".ppm" and pixels.ndim != 3:
            raise ValueError(f"{path}: PPM needs a color image")
        write_pnm(path, pixels)
    else:
        Image.fromarray(pixels).save(path)
