"""Anomaly scores comparing an input patch with its reconstruction.

All image arguments are 8-bit gray arrays of identical shape. Pixel-space
errors (MSE, PSNR) use raw 0-255 intensities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from .edges import CannyParams, canny, edge_count, sobel_gradients
from .imagecore import as_gray, gaussian_pyramid, minmax_normalize

DEFAULT_KAPPA = 1.0
DEFAULT_ALPHA = 0.05


class FeatureExtractor(Protocol):
    feature_dim: int

    def __call__(self, img: np.ndarray) -> np.ndarray: ...


def _pair(x, xhat) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_gray(x), as_gray(xhat)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def score_canny(x, xhat, params: CannyParams | None = None) -> int:
    """Signed edge-count difference N(x) - N(xhat)."""
    a, b = _pair(x, xhat)
    params = params or CannyParams()
    return edge_count(canny(a, params)) - edge_count(canny(b, params))


def score_mse(x, xhat) -> float:
    a, b = _pair(x, xhat)
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(d * d))


def psnr_from_mse(mse: float) -> float:
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def score_psnr(x, xhat) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    return psnr_from_mse(score_mse(x, xhat))


def score_residual(x, xhat) -> float:
    """L2 norm between the independently min-max normalized images."""
    a, b = _pair(x, xhat)
    return float(np.linalg.norm((minmax_normalize(a) - minmax_normalize(b)).ravel()))


def score_origin(z) -> float:
    return float(np.linalg.norm(np.asarray(z, dtype=np.float64).ravel()))


def score_feature(x, xhat, extractor: FeatureExtractor) -> float:
    a, b = _pair(x, xhat)
    fa = np.asarray(extractor(a), dtype=np.float64)
    fb = np.asarray(extractor(b), dtype=np.float64)
    if fa.shape != (extractor.feature_dim,) or fb.shape != (extractor.feature_dim,):
        raise ValueError(
            f"extractor returned {fa.shape}/{fb.shape}, expected ({extractor.feature_dim},)"
        )
    d = fa - fb
    return float(np.mean(d * d))


def score_f_anogan(x, xhat, extractor: FeatureExtractor, kappa: float = DEFAULT_KAPPA) -> float:
    return score_mse(x, xhat) + kappa * score_feature(x, xhat, extractor)


def score_pg_anogan(x, xhat, z, alpha: float = DEFAULT_ALPHA) -> float:
    return alpha * score_residual(x, xhat) + (1.0 - alpha) * score_origin(z)


def score_baseline(x, params: CannyParams | None = None) -> int:
    """Edge count of the input alone; needs no reconstruction."""
    return edge_count(canny(as_gray(x), params or CannyParams()))


class IdentityExtractor:
    """Flattened pixels on a 0-1 scale."""

    def __init__(self, shape=(64, 64)):
        self.shape = tuple(shape)
        self.feature_dim = self.shape[0] * self.shape[1]

    def __call__(self, img):
        a = as_gray(img)
        if a.shape != self.shape:
            raise ValueError(f"expected image of shape {self.shape}, got {a.shape}")
        return a.ravel().astype(np.float64) / 255.0


class PyramidGradientExtractor:
    """Hand-crafted stand-in for a trained discriminator's features.

    Features are, in order: the pixels (0-1 scale) of each level of a
    3-level Gaussian pyramid, then for each level the mean Sobel gradient
    magnitude inside every cell of an 8x8 grid. For 64x64 inputs this is
    4096 + 1024 + 256 + 3 * 64 = 5568 values.
    """

    levels = 3
    grid = 8

    def __init__(self, shape=(64, 64)):
        self.shape = tuple(shape)
        dims = [self.shape]
        for _ in range(self.levels - 1):
            dims.append((dims[-1][0] // 2, dims[-1][1] // 2))
        if min(dims[-1]) < self.grid:
            raise ValueError(f"shape {self.shape} too small for {self.levels} levels")
        self.feature_dim = sum(h * w for h, w in dims) + self.levels * self.grid * self.grid

    def _cell_means(self, mag: np.ndarray) -> np.ndarray:
        rows = np.array_split(np.arange(mag.shape[0]), self.grid)
        cols = np.array_split(np.arange(mag.shape[1]), self.grid)
        return np.array([mag[np.ix_(r, c)].mean() for r in rows for c in cols])

    def __call__(self, img):
        a = as_gray(img)
        if a.shape != self.shape:
            raise ValueError(f"expected image of shape {self.shape}, got {a.shape}")
        pyr = gaussian_pyramid(a.astype(np.float64) / 255.0, self.levels)
        grads = [self._cell_means(sobel_gradients(level)[0]) for level in pyr]
        return np.concatenate([p.ravel() for p in pyr] + grads)


def default_feature_extractor(shape=(64, 64)) -> FeatureExtractor:
    return PyramidGradientExtractor(shape)


@dataclass(frozen=True)
class ScoreBundle:
    """Every score for one sample. Scores lacking their inputs are ``None``."""

    baseline_edges: int
    a_canny: Optional[int] = None
    a_mse: Optional[float] = None
    a_d: Optional[float] = None
    a_res: Optional[float] = None
    a_origin: Optional[float] = None
    a_f_anogan: Optional[float] = None
    a_pg_anogan: Optional[float] = None
    psnr: Optional[float] = None

    @property
    def a_canny_abs(self) -> Optional[int]:
        return None if self.a_canny is None else abs(self.a_canny)


def score_all(
    x,
    xhat=None,
    z=None,
    params: CannyParams | None = None,
    extractor: FeatureExtractor | None = None,
    kappa: float = DEFAULT_KAPPA,
    alpha: float = DEFAULT_ALPHA,
) -> ScoreBundle:
    """Compute whatever scores the available inputs allow."""
    params = params or CannyParams()
    x = as_gray(x)
    n_x = edge_count(canny(x, params))
    if xhat is None:
        return ScoreBundle(baseline_edges=n_x,
                           a_origin=None if z is None else score_origin(z))
    x, xhat = _pair(x, xhat)
    extractor = extractor or default_feature_extractor(x.shape)
    a_mse = score_mse(x, xhat)
    a_d = score_feature(x, xhat, extractor)
    a_res = score_residual(x, xhat)
    a_origin = None if z is None else score_origin(z)
    return ScoreBundle(
        baseline_edges=n_x,
        a_canny=n_x - edge_count(canny(xhat, params)),
        a_mse=a_mse,
        a_d=a_d,
        a_res=a_res,
        a_origin=a_origin,
        a_f_anogan=a_mse + kappa * a_d,
        a_pg_anogan=None if a_origin is None else alpha * a_res + (1.0 - alpha) * a_origin,
        psnr=psnr_from_mse(a_mse),
    )
