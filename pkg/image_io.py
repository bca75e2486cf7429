"""
Image file I/O

Binary PPM (P6, maxval 255) is read and written bit-exactly; 8-bit RGB PNG
goes through pypng. Pixels are uint8 (h, w, 3) on disk and float32 in [0, 1]
inside the pipeline.
"""

import logging
import os

import numpy as np
import png

logger = logging.getLogger(__name__)

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class ImageDecodeError(ValueError):
    """An input file is not a readable P6 PPM or 8-bit RGB PNG"""


def _ppm_tokens(data: bytes, count: int):
    # Header tokens are whitespace separated; '#' starts a comment up to EOL.
    tokens = []
    pos = 2
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise ImageDecodeError("PPM header ends early")
        if data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def decode_ppm(data: bytes, name: str = "<bytes>") -> np.ndarray:
    """Decode P6 bytes into a uint8 (h, w, 3) array"""
    if data[:2] != b"P6":
        raise ImageDecodeError(f"{name}: expected P6 magic, got {data[:2]!r}")
    tokens, offset = _ppm_tokens(data, 3)
    try:
        width, height, maxval = (int(token) for token in tokens)
    except ValueError:
        raise ImageDecodeError(f"{name}: malformed PPM header {tokens!r}") from None
    if maxval != 255:
        raise ImageDecodeError(f"{name}: maxval {maxval} is not supported, expected 255")
    if width < 1 or height < 1:
        raise ImageDecodeError(f"{name}: empty image {width}x{height}")
    size = width * height * 3
    raster = data[offset:offset + size]
    if len(raster) != size:
        raise ImageDecodeError(f"{name}: truncated raster, expected {size} bytes, got {len(raster)}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3).copy()


def encode_ppm(pixels: np.ndarray) -> bytes:
    """Encode a uint8 (h, w, 3) array as P6 bytes"""
    if pixels.dtype != np.uint8 or pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError(f"PPM needs uint8 (h, w, 3) pixels, got {pixels.dtype} {pixels.shape}")
    h, w, _ = pixels.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(pixels).tobytes()


def read_ppm(path: str) -> np.ndarray:
    with open(path, "rb") as handle:
        return decode_ppm(handle.read(), path)


def write_ppm(path: str, pixels: np.ndarray) -> None:
    with open(path, "wb") as handle:
        handle.write(encode_ppm(pixels))


def read_png(path: str) -> np.ndarray:
    """Read an 8-bit RGB PNG (greyscale and palette images are expanded; alpha is rejected)"""
    try:
        width, height, rows, info = png.Reader(filename=path).asRGB8()
        pixels = np.vstack([np.asarray(row, dtype=np.uint8) for row in rows])
    except png.Error as exc:
        raise ImageDecodeError(f"{path}: {exc}") from exc
    if info.get("alpha"):
        raise ImageDecodeError(f"{path}: PNG with alpha channel is not supported")
    return pixels.reshape(height, width, 3)


def write_png(path: str, pixels: np.ndarray) -> None:
    """Write a uint8 (h, w, 3) array as an 8-bit RGB PNG"""
    if pixels.dtype != np.uint8 or pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError(f"PNG needs uint8 (h, w, 3) pixels, got {pixels.dtype} {pixels.shape}")
    h, w, _ = pixels.shape
    writer = png.Writer(w, h, greyscale=False, bitdepth=8)
    with open(path, "wb") as handle:
        writer.write(handle, pixels.reshape(h, w * 3))


def read_image(path: str) -> np.ndarray:
    """
    Read a PPM or PNG file, chosen by its leading bytes

    Raises:
        ImageDecodeError: If the file is missing, unreadable or in neither format
    """
    try:
        with open(path, "rb") as handle:
            head = handle.read(8)
    except OSError as exc:
        raise ImageDecodeError(f"{path}: {exc.strerror}") from exc
    if head.startswith(PNG_SIGNATURE):
        return read_png(path)
    if head.startswith(b"P6"):
        return read_ppm(path)
    raise ImageDecodeError(f"{path}: neither a P6 PPM nor a PNG file")


def write_image(path: str, pixels: np.ndarray) -> None:
    """Write PNG for a .png suffix, PPM otherwise"""
    if os.path.splitext(path)[1].lower() == ".png":
        write_png(path, pixels)
    else:
        write_ppm(path, pixels)
    logger.debug("Wrote %dx%d image to %s", pixels.shape[1], pixels.shape[0], path)


def to_float(pixels: np.ndarray) -> np.ndarray:
    """uint8 pixels to float32 in [0, 1]"""
    return pixels.astype(np.float32) / np.float32(255.0)


def to_uint8(image: np.ndarray) -> np.ndarray:
    """float pixels in [0, 1] to uint8, rounding to nearest"""
    return np.clip(np.rint(np.asarray(image, dtype=np.float32) * 255.0), 0, 255).astype(np.uint8)


def gray_to_rgb(gray: np.ndarray) -> np.ndarray:
    """Replicate an 8-bit grey map into three equal channels"""
    return np.repeat(gray[:, :, None], 3, axis=2)
