"""Latent projection: find z such that G(z) reproduces a given patch.

A generator maps a latent vector to a 64x64 float image in [-1, 1] and can
pull an image-space gradient back to latent space. A distance compares a
target with a candidate image and returns the gradient with respect to the
candidate. :func:`project` runs plain gradient descent on
``D(target, G(z))`` with optional step-halving backtracking.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Protocol, Union

import numpy as np

from .imagecore import as_float, as_gray, quantize, reduce_matrix, to_float

IMAGE_SHAPE = (64, 64)
N_PIXELS = IMAGE_SHAPE[0] * IMAGE_SHAPE[1]
MAX_HALVINGS = 20

TGEN_MAGIC = b"TGEN"
TGEN_VERSION = 1


class Generator(Protocol):
    latent_dim: int

    def generate(self, z: np.ndarray) -> np.ndarray: ...

    def pullback(self, z: np.ndarray, out_grad: np.ndarray) -> np.ndarray: ...


class Distance(Protocol):
    def value(self, target: np.ndarray, candidate: np.ndarray) -> float: ...

    def gradient(self, target: np.ndarray, candidate: np.ndarray) -> np.ndarray: ...


class ProjectionError(ArithmeticError):
    def __init__(self, step: int, what: str):
        super().__init__(f"non-finite {what} at step {step}")
        self.step = step


# ---------------------------------------------------------------- toy generator

@dataclass(frozen=True, eq=False)
class ToyGeneratorParams:
    """Weights of ``tanh(W2 @ relu(W1 @ z + b1) + b2)``.

    ``W1`` is (h, d), ``W2`` is (4096, h). Weights are stored as float32
    values (held in float64 arrays) so the TGEN file round-trips exactly.
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        h, d = np.shape(self.W1)
        shapes = {"b1": (h,), "W2": (N_PIXELS, h), "b2": (N_PIXELS,)}
        for name, shape in shapes.items():
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} has shape {np.shape(getattr(self, name))}, expected {shape}")
        for name in ("W1", "b1", "W2", "b2"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def d(self) -> int:
        return self.W1.shape[1]

    @property
    def h(self) -> int:
        return self.W1.shape[0]

    @classmethod
    def initialize(cls, d: int = 8, h: int = 32, seed: int = 0) -> "ToyGeneratorParams":
        """Uniform(-a, a) weights and biases with a = 1/sqrt(fan_in)."""
        if d < 1 or h < 1:
            raise ValueError(f"d and h must be positive, got d={d}, h={h}")
        rng = np.random.default_rng(seed)

        def draw(shape, fan_in):
            a = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-a, a, size=shape).astype(np.float32).astype(np.float64)

        return cls(W1=draw((h, d), d), b1=draw(h, d),
                   W2=draw((N_PIXELS, h), h), b2=draw(N_PIXELS, h), seed=seed)

    def to_bytes(self) -> bytes:
        head = TGEN_MAGIC + struct.pack("<III", TGEN_VERSION, self.d, self.h)
        body = b"".join(np.asarray(a, dtype="<f4").tobytes() for a in (self.W1, self.b1, self.W2, self.b2))
        return head + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "ToyGeneratorParams":
        if len(data) < 16 or data[:4] != TGEN_MAGIC:
            raise ValueError("not a TGEN file")
        version, d, h = struct.unpack("<III", data[4:16])
        if version != TGEN_VERSION:
            raise ValueError(f"unsupported TGEN version {version}")
        sizes = [h * d, h, N_PIXELS * h, N_PIXELS]
        if len(data) != 16 + 4 * sum(sizes):
            raise ValueError(f"TGEN payload has {len(data) - 16} bytes, expected {4 * sum(sizes)}")
        flat = np.frombuffer(data, dtype="<f4", offset=16).astype(np.float64)
        parts = np.split(flat, np.cumsum(sizes)[:-1])
        return cls(W1=parts[0].reshape(h, d), b1=parts[1],
                   W2=parts[2].reshape(N_PIXELS, h), b2=parts[3])

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ToyGeneratorParams":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _check_latent(params: ToyGeneratorParams, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (params.d,):
        raise ValueError(f"latent has shape {z.shape}, generator expects ({params.d},)")
    return z


def toy_generate(params: ToyGeneratorParams, z) -> np.ndarray:
    z = _check_latent(params, z)
    hidden = np.maximum(params.W1 @ z + params.b1, 0.0)
    return np.tanh(params.W2 @ hidden + params.b2).reshape(IMAGE_SHAPE)


def toy_pullback(params: ToyGeneratorParams, z, out_grad) -> np.ndarray:
    """Gradient of ``<out_grad, toy_generate(params, z)>`` with respect to z.

    The relu derivative at exactly 0 is taken to be 0.
    """
    z = _check_latent(params, z)
    g = np.asarray(out_grad, dtype=np.float64)
    if g.shape != IMAGE_SHAPE:
        raise ValueError(f"out_grad has shape {g.shape}, expected {IMAGE_SHAPE}")
    pre = params.W1 @ z + params.b1
    y = np.tanh(params.W2 @ np.maximum(pre, 0.0) + params.b2)
    back = params.W2.T @ (g.ravel() * (1.0 - y * y))
    return params.W1.T @ np.where(pre > 0.0, back, 0.0)


class ToyGenerator:
    """Two-layer MLP generator with an exact pullback."""

    def __init__(self, params: ToyGeneratorParams):
        self.params = params
        self.latent_dim = params.d

    def generate(self, z):
        return toy_generate(self.params, z)

    def pullback(self, z, out_grad):
        return toy_pullback(self.params, z, out_grad)


# -------------------------------------------------------------------- distances

class MSEDistance:
    def value(self, target, candidate):
        d = as_float(candidate) - as_float(target)
        return float(np.mean(d * d))

    def gradient(self, target, candidate):
        d = as_float(candidate) - as_float(target)
        return 2.0 * d / d.size


class PyramidDistance:
    """Sum over pyramid levels of the per-level MSE (level 1 = full resolution)."""

    def __init__(self, levels: int = 3):
        if levels < 1:
            raise ValueError(f"levels must be >= 1, got {levels}")
        self.levels = levels

    def _operators(self, shape):
        ops = []
        h, w = shape
        for _ in range(self.levels - 1):
            if h < 4 or w < 4:
                raise ValueError(f"image {shape} too small for {self.levels} pyramid levels")
            ops.append((reduce_matrix(h), reduce_matrix(w)))
            h, w = h // 2, w // 2
        return ops

    def _diffs(self, target, candidate):
        t, c = as_float(target), as_float(candidate)
        if t.shape != c.shape:
            raise ValueError(f"dimension mismatch: {t.shape} vs {c.shape}")
        ops = self._operators(t.shape)
        d = c - t
        diffs = [d]
        for rows, cols in ops:
            d = rows @ d @ cols.T
            diffs.append(d)
        return diffs, ops

    def value(self, target, candidate):
        diffs, _ = self._diffs(target, candidate)
        return float(sum(np.mean(d * d) for d in diffs))

    def gradient(self, target, candidate):
        diffs, ops = self._diffs(target, candidate)
        acc = 2.0 * diffs[-1] / diffs[-1].size
        for (rows, cols), d in zip(reversed(ops), reversed(diffs[:-1])):
            acc = rows.T @ acc @ cols + 2.0 * d / d.size
        return acc


def mse_distance() -> MSEDistance:
    return MSEDistance()


def pyramid_distance(levels: int = 3) -> PyramidDistance:
    return PyramidDistance(levels)


DISTANCES = {"mse": mse_distance, "pyramid": pyramid_distance}


# -------------------------------------------------------------------- projector

@dataclass(frozen=True)
class ProjectionConfig:
    """``init`` is "origin", "random" (standard normal from ``seed``) or an explicit latent."""

    steps: int = 200
    step_size: float = 0.05
    init: Union[str, np.ndarray] = "origin"
    seed: int = 0
    backtracking: bool = True
    distance: Union[str, Distance] = "pyramid"

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.step_size > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if isinstance(self.init, str) and self.init not in ("origin", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        if isinstance(self.distance, str) and self.distance not in DISTANCES:
            raise ValueError(f"unknown distance {self.distance!r}")

    def make_distance(self) -> Distance:
        if isinstance(self.distance, str):
            return DISTANCES[self.distance]()
        return self.distance

    def initial_latent(self, dim: int) -> np.ndarray:
        if isinstance(self.init, str):
            if self.init == "origin":
                return np.zeros(dim)
            return np.random.default_rng(self.seed).standard_normal(dim)
        z = np.array(self.init, dtype=np.float64)
        if z.shape != (dim,):
            raise ValueError(f"init latent has shape {z.shape}, expected ({dim},)")
        return z


@dataclass
class ProjectionResult:
    z: np.ndarray
    reconstruction: np.ndarray
    loss_trace: np.ndarray
    skipped_steps: int = 0
    step_sizes: list = field(default_factory=list, repr=False)

    @property
    def initial_loss(self) -> float:
        return float(self.loss_trace[0])

    @property
    def final_loss(self) -> float:
        return float(self.loss_trace[-1])

    @property
    def steps_taken(self) -> int:
        return len(self.loss_trace) - 1 - self.skipped_steps


def project(generator: Generator, x, cfg: ProjectionConfig | None = None) -> ProjectionResult:
    """Gradient-descent projection of gray patch ``x`` onto the generator's range.

    With backtracking, a step that raises the loss is retried at half the
    step size, up to 20 times; if none succeeds, the step is skipped.
    """
    cfg = cfg or ProjectionConfig()
    x = as_gray(x)
    if x.shape != IMAGE_SHAPE:
        raise ValueError(f"input must be {IMAGE_SHAPE}, got {x.shape}")
    target = to_float(x, -1.0, 1.0)
    dist = cfg.make_distance()

    def evaluate(z):
        img = generator.generate(z)
        return dist.value(target, img), img

    z = cfg.initial_latent(generator.latent_dim)
    loss, img = evaluate(z)
    if not np.isfinite(loss):
        raise ProjectionError(0, "loss")
    trace = [loss]
    skipped = 0
    sizes = []
    for step in range(1, cfg.steps + 1):
        grad = generator.pullback(z, dist.gradient(target, img))
        if not np.all(np.isfinite(grad)):
            raise ProjectionError(step, "gradient")
        t = cfg.step_size
        for _ in range(MAX_HALVINGS + 1):
            z_new = z - t * grad
            loss_new, img_new = evaluate(z_new)
            if not np.isfinite(loss_new):
                raise ProjectionError(step, "loss")
            if not cfg.backtracking or loss_new <= loss:
                z, loss, img = z_new, loss_new, img_new
                sizes.append(t)
                break
            t *= 0.5
        else:
            skipped += 1
            sizes.append(0.0)
        trace.append(loss)
    return ProjectionResult(
        z=z,
        reconstruction=quantize(img, -1.0, 1.0),
        loss_trace=np.array(trace),
        skipped_steps=skipped,
        step_sizes=sizes,
    )
