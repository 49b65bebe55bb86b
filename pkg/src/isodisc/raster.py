"""Binary PGM (P5) and PPM (P6) rasters with maxval at most 255."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

__all__ = ["RasterFormatError", "parse_pnm", "read_pnm", "encode_pnm", "write_pnm", "atomic_write"]

_WHITESPACE = b" \t\n\r\v\f"


class RasterFormatError(ValueError):
    """Malformed raster; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def _next_token(data: bytes, pos: int) -> tuple[bytes, int, int]:
    while pos < len(data):
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise RasterFormatError("unexpected end of header", start)
    return data[start:pos], start, pos


def parse_pnm(data: bytes) -> np.ndarray:
    """Decode P5/P6 bytes into an ``(H, W)`` or ``(H, W, 3)`` uint8 array."""
    if data[:2] not in (b"P5", b"P6"):
        raise RasterFormatError(f"unsupported magic number {data[:2]!r}", 0)
    channels = 1 if data[:2] == b"P5" else 3
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        tok, start, pos = _next_token(data, pos)
        if not tok.isdigit():
            raise RasterFormatError(f"{name} is not a decimal integer: {tok!r}", start)
        value = int(tok)
        if value <= 0 or (name == "maxval" and value > 255):
            raise RasterFormatError(f"{name} out of range: {value}", start)
        fields.append(value)
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise RasterFormatError("missing whitespace after maxval", pos)
    pos += 1
    w, h, _ = fields
    size = w * h * channels
    if len(data) - pos < size:
        raise RasterFormatError(
            f"pixel data truncated: expected {size} bytes, found {len(data) - pos}", len(data)
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=size, offset=pos)
    shape = (h, w) if channels == 1 else (h, w, 3)
    return pixels.reshape(shape).copy()


def read_pnm(path: str | os.PathLike) -> np.ndarray:
    return parse_pnm(Path(path).read_bytes())


def encode_pnm(image: np.ndarray) -> bytes:
    image = np.asarray(image)
    if image.ndim == 2:
        magic = b"P5"
    elif image.ndim == 3 and image.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot encode raster of shape {image.shape}")
    if image.dtype != np.uint8:
        if image.min(initial=0) < 0 or image.max(initial=0) > 255:
            raise ValueError("pixel values must lie in [0, 255]")
        image = image.astype(np.uint8)
    h, w = image.shape[:2]
    return magic + b"\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(image).tobytes()


def atomic_write(path: str | os.PathLike, payload: bytes | str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    if isinstance(payload, str):
        payload = payload.encode()
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_pnm(path: str | os.PathLike, image: np.ndarray) -> None:
    atomic_write(path, encode_pnm(image))
