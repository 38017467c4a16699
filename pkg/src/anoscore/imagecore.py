"""Grayscale image primitives: PGM I/O, float conversion, normalization.

Images are plain numpy arrays indexed ``[row, col]``:

* a *gray image* is a 2-D ``uint8`` array (intensities 0-255),
* a *float image* is a 2-D ``float64`` array of finite values.
"""
from __future__ import annotations

import os
from functools import lru_cache

import numpy as np


class PGMError(ValueError):
    """Base class for PGM decoding failures."""


class PGMHeaderError(PGMError):
    """Magic number, dimensions or separators are malformed."""


class PGMMaxvalError(PGMError):
    """The file declares a maxval other than 255."""


class PGMTruncatedError(PGMError):
    """Fewer pixel bytes than the header promises."""


def as_gray(img) -> np.ndarray:
    """Validate and return ``img`` as a 2-D uint8 array."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("image must have positive width and height")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer) or arr.min() < 0 or arr.max() > 255:
            raise ValueError("gray image must hold integers in 0..255")
        arr = arr.astype(np.uint8)
    return arr


def as_float(img) -> np.ndarray:
    """Validate and return ``img`` as a 2-D float64 array of finite values."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("image must have positive width and height")
    if not np.all(np.isfinite(arr)):
        raise ValueError("float image contains NaN or Inf")
    return arr


def _read_token(data: bytes, pos: int, sep: bytes) -> tuple[bytes, int]:
    end = data.find(sep, pos)
    if end < 0:
        raise PGMHeaderError("unexpected end of header")
    return data[pos:end], end + 1


def decode_pgm(data: bytes) -> np.ndarray:
    """Decode a binary P5 PGM (header ``P5\\n<w> <h>\\n255\\n``)."""
    magic, pos = _read_token(data, 0, b"\n")
    if magic != b"P5":
        raise PGMHeaderError(f"bad magic {magic!r}, expected b'P5'")
    dims, pos = _read_token(data, pos, b"\n")
    parts = dims.split(b" ")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise PGMHeaderError(f"bad dimension line {dims!r}")
    width, height = int(parts[0]), int(parts[1])
    if width <= 0 or height <= 0:
        raise PGMHeaderError(f"non-positive dimensions {width}x{height}")
    maxval, pos = _read_token(data, pos, b"\n")
    if not maxval.isdigit():
        raise PGMHeaderError(f"bad maxval line {maxval!r}")
    if int(maxval) != 255:
        raise PGMMaxvalError(f"maxval {int(maxval)} not supported (need 255)")
    n = width * height
    body = data[pos:]
    if len(body) < n:
        raise PGMTruncatedError(f"expected {n} pixel bytes, found {len(body)}")
    if len(body) > n:
        raise PGMHeaderError(f"{len(body) - n} trailing bytes after pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy()


def encode_pgm(img) -> bytes:
    arr = as_gray(img)
    h, w = arr.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(arr).tobytes()


def load_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read a P5 PGM file. Raises FileNotFoundError or a PGMError subclass."""
    with open(path, "rb") as fh:
        data = fh.read()
    return decode_pgm(data)


def save_pgm(img, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img))


def _check_range(lo: float, hi: float) -> None:
    if not lo < hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")


def to_float(img, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Map 0..255 affinely onto [lo, hi]; 0 and 255 land exactly on the ends."""
    _check_range(lo, hi)
    p = as_gray(img).astype(np.float64)
    return lo + (p / 255.0) * (hi - lo)


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(img, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Inverse of :func:`to_float`: clamp to [lo, hi] and round to 0..255."""
    _check_range(lo, hi)
    v = np.clip(as_float(img), lo, hi)
    scaled = (v - lo) / (hi - lo) * 255.0
    return np.clip(round_half_away(scaled), 0, 255).astype(np.uint8)


def minmax_normalize(img) -> np.ndarray:
    """Stretch intensities to [0, 1]. A constant image maps to all zeros."""
    p = as_gray(img).astype(np.float64)
    lo, hi = p.min(), p.max()
    if hi == lo:
        return np.zeros_like(p)
    return (p - lo) / (hi - lo)


_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@lru_cache(maxsize=None)
def reduce_matrix(n: int) -> np.ndarray:
    """Linear operator (n//2, n): 5-tap binomial blur then keep every 2nd sample.

    Borders are reflect-101. Being an explicit matrix, its transpose gives
    the exact adjoint needed for backpropagating through a pyramid.
    """
    if n < 4:
        raise ValueError(f"cannot reduce a dimension of {n} pixels (need >= 4)")
    m = np.zeros((n // 2, n))
    for i in range(n // 2):
        for k, w in zip(range(-2, 3), _BINOMIAL5):
            j = 2 * i + k
            if j < 0:
                j = -j
            elif j >= n:
                j = 2 * (n - 1) - j
            m[i, j] += w
    m.flags.writeable = False
    return m


def pyramid_reduce(img) -> np.ndarray:
    f = as_float(img)
    return reduce_matrix(f.shape[0]) @ f @ reduce_matrix(f.shape[1]).T


def gaussian_pyramid(img, levels: int) -> list[np.ndarray]:
    """``levels`` images, the first being ``img`` itself at full resolution."""
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    out = [as_float(img)]
    for _ in range(levels - 1):
        out.append(pyramid_reduce(out[-1]))
    return out
