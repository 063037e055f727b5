"""Raster types and binary netpbm (P4/P5/P6) I/O.

Foreground polarity is fixed for the whole package: ``True`` in a
:class:`BinaryImage` means ink, which is bit 1 (black) in a P4 file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

MAX_DIMENSION = 1 << 16
LEVELS = 256


class NetpbmError(ValueError):
    """Base class for netpbm decoding failures."""


class MalformedHeaderError(NetpbmError):
    pass


class TruncatedPayloadError(NetpbmError):
    pass


class UnsupportedMaxvalError(NetpbmError):
    pass


class ZeroDimensionError(NetpbmError):
    pass


def _check_dims(height: int, width: int) -> None:
    if width < 1 or height < 1:
        raise ValueError(f"image dimensions must be >= 1, got {width}x{height}")
    if width > MAX_DIMENSION or height > MAX_DIMENSION:
        raise ValueError(
            f"image dimensions must be <= {MAX_DIMENSION}, got {width}x{height}"
        )


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _as_uint8(data, ndim: int) -> np.ndarray:
    arr = np.asarray(data)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError("samples must lie in [0, 255]")
        if np.issubdtype(arr.dtype, np.floating) and not np.array_equal(arr, np.round(arr)):
            raise ValueError("samples must be integral")
        arr = arr.astype(np.uint8)
    else:
        arr = arr.copy()
    return arr


class _Raster:
    data: np.ndarray

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((type(self).__name__, self.data.shape, self.data.tobytes()))


@dataclass(frozen=True, eq=False)
class RgbImage(_Raster):
    """8-bit RGB raster stored as an (H, W, 3) uint8 array."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_uint8(self.data, 3)
        if arr.shape[2] != 3:
            raise ValueError(f"RGB data needs 3 channels, got {arr.shape[2]}")
        _check_dims(arr.shape[0], arr.shape[1])
        object.__setattr__(self, "data", _frozen(arr))


@dataclass(frozen=True, eq=False)
class GrayImage(_Raster):
    """8-bit single-channel raster stored as an (H, W) uint8 array."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_uint8(self.data, 2)
        _check_dims(*arr.shape)
        object.__setattr__(self, "data", _frozen(arr))


@dataclass(frozen=True, eq=False)
class BinaryImage(_Raster):
    """Boolean mask; ``True`` marks foreground (ink)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {arr.shape}")
        if arr.dtype != np.bool_:
            if arr.size and not np.isin(arr, (0, 1)).all():
                raise ValueError("binary data must contain only 0/1 or booleans")
            arr = arr.astype(bool)
        else:
            arr = arr.copy()
        _check_dims(*arr.shape)
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.data))


Image = Union[RgbImage, GrayImage, BinaryImage]


@dataclass(frozen=True, eq=False)
class Histogram:
    """256-bin gray-level histogram with normalized probabilities."""

    counts: np.ndarray
    total: int = field(init=False)
    probabilities: np.ndarray = field(init=False)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (LEVELS,):
            raise ValueError(f"histogram needs {LEVELS} bins, got shape {counts.shape}")
        if counts.size and counts.min() < 0:
            raise ValueError("histogram counts must be non-negative")
        counts = counts.astype(np.int64)
        total = int(counts.sum())
        if total:
            probs = counts / float(total)
        else:
            probs = np.zeros(LEVELS)
        object.__setattr__(self, "counts", _frozen(counts))
        object.__setattr__(self, "total", total)
        object.__setattr__(self, "probabilities", _frozen(probs))

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    __hash__ = None

    @property
    def occupied_levels(self) -> np.ndarray:
        return np.flatnonzero(self.counts)


def histogram(image: GrayImage) -> Histogram:
    return Histogram(np.bincount(image.data.ravel(), minlength=LEVELS))


# -- netpbm -----------------------------------------------------------------

_MAGICS = {b"P4": BinaryImage, b"P5": GrayImage, b"P6": RgbImage}
_WHITESPACE = b" \t\n\r\v\f"


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    """Return the next header token and the position just past it.

    Whitespace and ``#`` comments (to end of line) before the token are
    skipped.
    """
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c in _WHITESPACE:
            pos += 1
        elif c == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos:pos + 1] not in _WHITESPACE and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise MalformedHeaderError("unexpected end of header")
    return buf[start:pos], pos


def _read_int(buf: bytes, pos: int, what: str) -> tuple[int, int]:
    tok, pos = _read_token(buf, pos)
    if not tok.isdigit():
        raise MalformedHeaderError(f"{what} is not a decimal integer: {tok!r}")
    return int(tok), pos


def read_netpbm(data: bytes) -> Image:
    """Decode a binary P4, P5 or P6 file.

    Raises a distinct :class:`NetpbmError` subclass for a malformed
    header, a zero dimension, a maxval other than 255 and a truncated
    payload.
    """
    buf = bytes(data)
    magic = buf[:2]
    if magic not in _MAGICS:
        raise MalformedHeaderError(f"unsupported magic number {magic!r}")
    pos = 2
    if len(buf) <= pos or buf[pos:pos + 1] not in _WHITESPACE + b"#":
        raise MalformedHeaderError("magic number must be followed by whitespace")
    width, pos = _read_int(buf, pos, "width")
    height, pos = _read_int(buf, pos, "height")
    if width == 0 or height == 0:
        raise ZeroDimensionError(f"zero dimension in header: {width}x{height}")
    if width > MAX_DIMENSION or height > MAX_DIMENSION:
        raise MalformedHeaderError(
            f"dimensions {width}x{height} exceed the {MAX_DIMENSION} limit"
        )
    kind = _MAGICS[magic]
    if kind is not BinaryImage:
        maxval, pos = _read_int(buf, pos, "maxval")
        if maxval != 255:
            raise UnsupportedMaxvalError(f"maxval must be 255, got {maxval}")
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(buf) or buf[pos:pos + 1] not in _WHITESPACE:
        raise MalformedHeaderError("header must end with a single whitespace byte")
    pos += 1

    if kind is BinaryImage:
        row_bytes = (width + 7) // 8
        need = row_bytes * height
    elif kind is GrayImage:
        need = width * height
    else:
        need = width * height * 3
    payload = buf[pos:pos + need]
    if len(payload) < need:
        raise TruncatedPayloadError(
            f"payload truncated: expected {need} bytes, got {len(payload)}"
        )
    raw = np.frombuffer(payload, dtype=np.uint8)
    if kind is BinaryImage:
        bits = np.unpackbits(raw.reshape(height, row_bytes), axis=1)[:, :width]
        return BinaryImage(bits.astype(bool))
    if kind is GrayImage:
        return GrayImage(raw.reshape(height, width))
    return RgbImage(raw.reshape(height, width, 3))


def write_netpbm(image: Image) -> bytes:
    """Encode ``image`` in canonical binary netpbm form."""
    h, w = image.height, image.width
    if isinstance(image, BinaryImage):
        header = b"P4\n%d %d\n" % (w, h)
        payload = np.packbits(image.data, axis=1).tobytes()
    elif isinstance(image, GrayImage):
        header = b"P5\n%d %d\n255\n" % (w, h)
        payload = image.data.tobytes()
    elif isinstance(image, RgbImage):
        header = b"P6\n%d %d\n255\n" % (w, h)
        payload = image.data.tobytes()
    else:
        raise TypeError(f"cannot encode {type(image).__name__}")
    return header + payload


def load(path) -> Image:
    with open(path, "rb") as fh:
        return read_netpbm(fh.read())


def save(image: Image, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_netpbm(image))


def round_to_uint8(values) -> np.ndarray:
    """Round half away from zero, then clamp to [0, 255]."""
    v = np.asarray(values, dtype=np.float64)
    r = np.sign(v) * np.floor(np.abs(v) + 0.5)
    return np.clip(r, 0, 255).astype(np.uint8)
