"""Deterministic synthetic 64x64 patches with two classes.

``normal`` patches carry a few scattered dark blobs on a light background.
``anomaly`` patches carry many blobs packed into a few irregular clusters,
so they contain far more edge structure while the blob and background
intensities stay the same.

Randomness comes from SplitMix64 used as a counter-based generator: the
i-th 64-bit output of a stream with key ``k`` is ``mix(k + (i + 1) * G)``
with ``G = 0x9E3779B97F4A7C15`` and

    mix(x): x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
            x = (x ^ (x >> 27)) * 0x94D049BB133111EB
            return x ^ (x >> 31)

(all arithmetic mod 2**64). Uniform doubles are ``(u >> 11) * 2**-53``.
Each patch owns the key ``mix(mix(mix(seed) ^ class_code) ^ index)`` with
class_code 0 for normal and 1 for anomaly; shape parameters and pixel noise
use the sub-keys ``mix(key ^ 1)`` and ``mix(key ^ 2)``. A patch therefore
depends only on (seed, class, index), never on generation order.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imagecore import round_half_away, save_pgm

GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

CLASS_CODES = {"normal": 0, "anomaly": 1}
PATCH_SHAPE = (64, 64)
_SUPERSAMPLE = 4


def mix64(x):
    """SplitMix64 finalizer on uint64 arrays (or Python ints)."""
    if isinstance(x, (int, np.integer)):
        return int(mix64(np.array([int(x) & _MASK64], dtype=np.uint64))[0])
    x = np.asarray(x, dtype=np.uint64)
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


class CounterStream:
    """Sequential reader over a keyed SplitMix64 counter stream."""

    def __init__(self, key: int):
        self.key = np.uint64(key & _MASK64)
        self.counter = 0

    def bits(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        return mix64(self.key + idx * GOLDEN_GAMMA)

    def uniform(self, n: int) -> np.ndarray:
        return (self.bits(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def uniform_range(self, lo: float, hi: float, n: int = 1) -> np.ndarray:
        return lo + (hi - lo) * self.uniform(n)

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer in the closed range [lo, hi]."""
        return lo + int(np.floor(self.uniform(1)[0] * (hi - lo + 1)))

    def normal(self, n: int) -> np.ndarray:
        """Standard normals by Box-Muller, consuming two uniforms per value."""
        u = self.uniform(2 * n)
        u1 = 1.0 - u[0::2]  # (0, 1], safe for log
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u[1::2])


def patch_key(seed: int, label: str, index: int) -> int:
    return mix64(mix64(mix64(seed) ^ CLASS_CODES[label]) ^ (index & _MASK64))


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_normal: int = 100
    n_anomaly: int = 100
    normal_blob_count_range: tuple = (4, 10)
    anomaly_blob_count_range: tuple = (25, 45)
    blob_radius_range_px: tuple = (2.0, 5.0)
    background_intensity: float = 220.0
    blob_intensity: float = 60.0
    noise_std: float = 6.0
    anomaly_cluster_count_range: tuple = (2, 4)
    anomaly_cluster_spread_px: float = 7.0

    def __post_init__(self):
        if self.n_normal < 0 or self.n_anomaly < 0:
            raise ValueError("sample counts must be >= 0")
        for name in ("normal_blob_count_range", "anomaly_blob_count_range",
                     "blob_radius_range_px", "anomaly_cluster_count_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValueError(f"{name} must be a non-empty non-negative range, got {(lo, hi)}")
        if self.blob_radius_range_px[0] <= 0:
            raise ValueError("blob radii must be positive")
        if self.anomaly_cluster_count_range[0] < 1:
            raise ValueError("need at least one anomaly cluster")
        for name in ("background_intensity", "blob_intensity"):
            if not 0 <= getattr(self, name) <= 255:
                raise ValueError(f"{name} must lie in 0..255")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


def _ellipse_coverage(cy, cx, ry, rx, theta, shape=PATCH_SHAPE) -> np.ndarray:
    """Fraction of each pixel inside a rotated ellipse (4x4 supersampling)."""
    h, w = shape
    cov = np.zeros(shape)
    reach = max(ry, rx) + 1.0
    r0, r1 = max(int(np.floor(cy - reach)), 0), min(int(np.ceil(cy + reach)) + 1, h)
    c0, c1 = max(int(np.floor(cx - reach)), 0), min(int(np.ceil(cx + reach)) + 1, w)
    if r0 >= r1 or c0 >= c1:
        return cov
    offs = (np.arange(_SUPERSAMPLE) + 0.5) / _SUPERSAMPLE - 0.5
    ys = (np.arange(r0, r1)[:, None] + offs[None, :]).ravel()
    xs = (np.arange(c0, c1)[:, None] + offs[None, :]).ravel()
    dy, dx = np.meshgrid(ys - cy, xs - cx, indexing="ij")
    c, s = np.cos(theta), np.sin(theta)
    u = (dx * c + dy * s) / rx
    v = (-dx * s + dy * c) / ry
    inside = (u * u + v * v <= 1.0).astype(np.float64)
    inside = inside.reshape(r1 - r0, _SUPERSAMPLE, c1 - c0, _SUPERSAMPLE).mean(axis=(1, 3))
    cov[r0:r1, c0:c1] = inside
    return cov


def _blob_centres(cfg: SynthConfig, label: str, count: int, rng: CounterStream) -> np.ndarray:
    h, w = PATCH_SHAPE
    if label == "normal":
        return np.column_stack([rng.uniform_range(2, h - 2, count),
                                rng.uniform_range(2, w - 2, count)])
    k = rng.integer(*cfg.anomaly_cluster_count_range)
    centres = np.column_stack([rng.uniform_range(10, h - 10, k),
                               rng.uniform_range(10, w - 10, k)])
    owner = np.floor(rng.uniform(count) * k).astype(int)
    offsets = rng.normal(2 * count).reshape(count, 2) * cfg.anomaly_cluster_spread_px
    return np.clip(centres[owner] + offsets, 0, [h - 1, w - 1])


def gen_patch(cfg: SynthConfig, label: str, index: int) -> np.ndarray:
    """One 64x64 uint8 patch, a pure function of (cfg, label, index)."""
    if label not in CLASS_CODES:
        raise ValueError(f"unknown class {label!r}")
    key = patch_key(cfg.seed, label, index)
    shape_rng = CounterStream(mix64(key ^ 1))
    noise_rng = CounterStream(mix64(key ^ 2))

    lo, hi = cfg.normal_blob_count_range if label == "normal" else cfg.anomaly_blob_count_range
    count = shape_rng.integer(int(lo), int(hi))
    coverage = np.zeros(PATCH_SHAPE)
    if count:
        centres = _blob_centres(cfg, label, count, shape_rng)
        radii = shape_rng.uniform_range(*cfg.blob_radius_range_px, 2 * count).reshape(count, 2)
        angles = shape_rng.uniform_range(0.0, np.pi, count)
        for (cy, cx), (ry, rx), theta in zip(centres, radii, angles):
            coverage = np.maximum(coverage, _ellipse_coverage(cy, cx, ry, rx, theta))

    img = cfg.background_intensity + (cfg.blob_intensity - cfg.background_intensity) * coverage
    if cfg.noise_std > 0:
        img = img + cfg.noise_std * noise_rng.normal(img.size).reshape(PATCH_SHAPE)
    return np.clip(round_half_away(img), 0, 255).astype(np.uint8)


def sample_ids(cfg: SynthConfig) -> list[tuple[str, str, int]]:
    """(id, label, index) for every sample in manifest order."""
    return ([(f"normal_{i}", "normal", i) for i in range(cfg.n_normal)]
            + [(f"anomaly_{i}", "anomaly", i) for i in range(cfg.n_anomaly)])


def gen_dataset(cfg: SynthConfig, out_dir, threads: int = 1) -> Path:
    """Write ``<class>_<index>.pgm`` files and ``manifest.csv`` (id,label,path).

    Paths in the manifest are relative to ``out_dir``. Returns the manifest path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = sample_ids(cfg)

    def write(row):
        sid, label, index = row
        save_pgm(gen_patch(cfg, label, index), out / f"{sid}.pgm")

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(write, rows))
    else:
        for row in rows:
            write(row)

    manifest = out / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "label", "path"])
        for sid, label, _ in rows:
            writer.writerow([sid, label, f"{sid}.pgm"])
    return manifest


def read_manifest(path) -> list[tuple[str, str, Path]]:
    """Rows of a manifest as (id, label, absolute-or-resolved path)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "label", "path"]:
            raise ValueError(f"{path}: bad manifest header {header}")
        rows = []
        for rec in reader:
            if len(rec) != 3:
                raise ValueError(f"{path}: malformed row {rec}")
            sid, label, p = rec
            rows.append((sid, label, Path(p) if os.path.isabs(p) else path.parent / p))
    return rows
