"""Canny edge detection on 0-255 grayscale patches.

Pipeline: separable Gaussian blur, 3x3 Sobel gradients, non-maximum
suppression over four quantized directions, then 8-connected hysteresis.
All stages pad with reflect-101 (``abcd|cba``, the border pixel is not
repeated), so constant images produce no gradient anywhere.

Gradient magnitudes are raw Sobel responses on 0-255 intensities; the
default thresholds (100, 200) are in those units.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecore import as_float, as_gray


@dataclass(frozen=True)
class CannyParams:
    kernel_size: int = 5
    sigma: float = 3.0
    low_threshold: float = 100.0
    high_threshold: float = 200.0

    def __post_init__(self):
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and >= 3, got {self.kernel_size}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0 <= self.low_threshold <= self.high_threshold:
            raise ValueError(
                f"need 0 <= low <= high, got low={self.low_threshold}, high={self.high_threshold}"
            )


def gaussian_kernel(kernel_size: int, sigma: float) -> np.ndarray:
    """1-D Gaussian sampled at integer offsets from the centre, summing to 1."""
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ValueError(f"kernel_size must be odd and positive, got {kernel_size}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = kernel_size // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def _correlate_rows(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # along axis 1, reflect-101 borders
    r = len(kernel) // 2
    padded = np.pad(img, ((0, 0), (r, r)), mode="reflect")
    w = img.shape[1]
    out = np.zeros_like(img)
    for k, weight in enumerate(kernel):
        out += weight * padded[:, k:k + w]
    return out


def gaussian_blur(img, kernel_size: int = 5, sigma: float = 3.0) -> np.ndarray:
    f = as_float(img)
    if min(f.shape) < kernel_size:
        raise ValueError(f"image {f.shape} smaller than kernel {kernel_size}")
    kernel = gaussian_kernel(kernel_size, sigma)
    return _correlate_rows(_correlate_rows(f, kernel).T, kernel).T


def sobel_gradients(img) -> tuple[np.ndarray, np.ndarray]:
    """Return (magnitude, direction) with direction = atan2(gy, gx) in radians.

    gx grows to the right (increasing column), gy grows downward
    (increasing row).
    """
    f = as_float(img)
    if min(f.shape) < 3:
        raise ValueError(f"image {f.shape} too small for 3x3 Sobel")
    p = np.pad(f, 1, mode="reflect")
    h, w = f.shape
    dx = p[:, 2:w + 2] - p[:, 0:w]            # central difference per padded row
    gx = dx[0:h] + 2.0 * dx[1:h + 1] + dx[2:h + 2]
    dy = p[2:h + 2, :] - p[0:h, :]
    gy = dy[:, 0:w] + 2.0 * dy[:, 1:w + 1] + dy[:, 2:w + 2]
    return np.sqrt(gx * gx + gy * gy), np.arctan2(gy, gx)


def quantize_direction(direction: np.ndarray) -> np.ndarray:
    """Map gradient angles to sectors 0 (0 deg), 1 (45), 2 (90), 3 (135).

    Angles exactly on a sector boundary go to the lower sector index.
    """
    a = np.mod(np.asarray(direction, dtype=np.float64), np.pi)
    sector = np.ceil((a - np.pi / 8) / (np.pi / 4)).astype(np.int64)
    sector[sector == 4] = 0
    sector[sector < 0] = 0
    # the 135|0 boundary at 7pi/8 belongs to sector 0
    sector[a == 7 * np.pi / 8] = 0
    return sector


# (drow, dcol) of one neighbour per sector; the other is the negation
_SECTOR_OFFSETS = ((0, 1), (1, 1), (1, 0), (1, -1))


def nonmax_suppress(magnitude, direction) -> np.ndarray:
    """Zero every pixel that is smaller than a neighbour along its gradient."""
    mag = as_float(magnitude)
    ang = np.asarray(direction, dtype=np.float64)
    if mag.shape != ang.shape:
        raise ValueError(f"shape mismatch: magnitude {mag.shape} vs direction {ang.shape}")
    h, w = mag.shape
    sector = quantize_direction(ang)
    p = np.pad(mag, 1, mode="constant", constant_values=0.0)
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dr, dc) in enumerate(_SECTOR_OFFSETS):
        fwd = p[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
        bwd = p[1 - dr:1 - dr + h, 1 - dc:1 - dc + w]
        keep |= (sector == s) & (mag >= fwd) & (mag >= bwd)
    return np.where(keep, mag, 0.0)


def _dilate8(mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    p = np.pad(mask, 1)
    out = mask.copy()
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr or dc:
                out |= p[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
    return out


def hysteresis(suppressed, low: float, high: float) -> np.ndarray:
    """Keep strong pixels (>= high) and weak ones (>= low) 8-connected to them."""
    if low > high:
        raise ValueError(f"low threshold {low} exceeds high threshold {high}")
    s = as_float(suppressed)
    candidate = s >= low
    edges = s >= high
    while True:
        grown = _dilate8(edges) & candidate
        if np.array_equal(grown, edges):
            return edges
        edges = grown


def canny(img, params: CannyParams | None = None) -> np.ndarray:
    """Binary edge map (bool array) of a gray image."""
    params = params or CannyParams()
    f = as_gray(img).astype(np.float64)
    if min(f.shape) < max(params.kernel_size, 3):
        raise ValueError(f"image {f.shape} smaller than kernel {params.kernel_size}")
    blurred = gaussian_blur(f, params.kernel_size, params.sigma)
    mag, ang = sobel_gradients(blurred)
    thin = nonmax_suppress(mag, ang)
    return hysteresis(thin, params.low_threshold, params.high_threshold)


def edge_count(edges) -> int:
    return int(np.count_nonzero(edges))
