"""Black-box transmissivity and bucket-detector readings.

Transmissivity is normalized by the pixel count, ``T = sum(A * X) / n**2``, so it
is a physical fraction in [0, 1]. Noise enters as a perturbation of the
transmissivity, ``B = I * (T - dT)``, floored at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mask import MaskSequence
from .scene import Scene

NOISE_KINDS = ("none", "uniform", "gaussian-truncated")


def normalization(n: int) -> int:
    """Constant dividing the raw mask/object overlap: the total pixel count."""
    return n * n


@dataclass(frozen=True)
class NoiseModel:
    """Transmissivity perturbation ``dT = T * u``.

    ``uniform`` draws ``u`` from [-amplitude, amplitude]; ``gaussian-truncated``
    uses sigma = amplitude / 2 and redraws outside the same interval.
    """

    kind: str = "none"
    amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if not 0.0 <= self.amplitude < 0.5:
            raise ValueError(f"noise amplitude must lie in [0, 0.5), got {self.amplitude!r}")

    @property
    def enabled(self) -> bool:
        return self.kind != "none" and self.amplitude > 0.0

    def rng(self, stream: int = 0) -> np.random.Generator:
        """Independent generator for sub-stream ``stream`` of this model's seed."""
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=(stream,))))

    def draw(self, T, rng: np.random.Generator | None = None):
        """Noise deltas for transmissivities ``T`` (scalar or array)."""
        T = np.asarray(T, dtype=np.float64)
        if not self.enabled:
            return np.zeros_like(T)[()]
        if rng is None:
            rng = self.rng()
        a = self.amplitude
        if self.kind == "uniform":
            u = rng.uniform(-a, a, size=T.shape)
        else:
            u = rng.normal(0.0, a / 2.0, size=T.shape)
            bad = np.abs(u) > a
            while np.any(bad):
                u[bad] = rng.normal(0.0, a / 2.0, size=int(bad.sum()))
                bad = np.abs(u) > a
        return (T * u)[()]


NO_NOISE = NoiseModel()


@dataclass(frozen=True)
class BucketSample:
    T: float
    noise: float
    I: float
    B: float


def transmissivity(frame: np.ndarray, scene: Scene) -> float:
    frame = np.asarray(frame)
    if frame.shape != scene.grid.shape:
        raise ValueError(f"frame shape {frame.shape} does not match scene shape {scene.grid.shape}")
    return float((frame * scene.grid).sum() / normalization(scene.n))


def transmissivities(mask: MaskSequence, scene: Scene) -> np.ndarray:
    """Per-frame transmissivity for a whole sequence, in frame order."""
    if scene.n != mask.n:
        raise ValueError(f"scene size {scene.n} does not match mask size {mask.n}")
    w = mask.block_width
    # (k, n, N) segment values: segments[b, r, q] = X[r, b*w + q]
    segments = scene.grid.reshape(mask.n, mask.k, w).transpose(1, 0, 2)
    overlap = np.zeros((mask.k, mask.n, w), dtype=np.float64)
    for q in range(w):
        overlap += segments[:, :, q:q + 1] * mask.s[:, q]
    return overlap.reshape(-1) / normalization(mask.n)


def bucket_values(I, T, dT=0.0):
    """Vectorized bucket reading ``max(0, I * (T - dT))``."""
    return np.maximum(0.0, np.asarray(I, dtype=np.float64) * (np.asarray(T) - np.asarray(dT)))


def bucket_signal(I: float, T: float, noise: NoiseModel = NO_NOISE, rng: np.random.Generator | None = None) -> BucketSample:
    if I < 0:
        raise ValueError(f"intensity must be non-negative, got {I}")
    dT = float(noise.draw(T, rng))
    return BucketSample(T=float(T), noise=dT, I=float(I), B=float(bucket_values(I, T, dT)))
