"""Image formation and analysis.

Persistence integration sums displayed patterns ``P_i = A_i * I_i`` over a
rectangular time window. The traditional baseline and the closed-form feedback
images are back-projections ``A^T v`` of a per-frame vector ``v``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from itertools import islice
from typing import Iterable

import numpy as np

from .feedback import ControllerConfig, DigitalControllerConfig
from .mask import MaskSequence, s_matrix_inverse
from .optics import transmissivities
from .scene import Scene

MODES = ("naked_eye_digital", "naked_eye_analog", "traditional", "closed_form_oracle")


class ZeroTransmissivityError(ValueError):
    def __init__(self, frames):
        self.frames = list(frames)
        preview = self.frames[:10]
        super().__init__(f"T = 0 at frames {preview}{'...' if len(self.frames) > 10 else ''}; b/T is undefined")


class NoisePreconditionError(ValueError):
    def __init__(self, frame: int, message: str):
        self.frame = frame
        super().__init__(f"frame {frame}: {message}")


def window_length(tau: float, frame_rate: float) -> int:
    """Frames inside one persistence window, ``floor(tau * frame_rate)``."""
    if tau <= 0 or frame_rate <= 0:
        raise ValueError(f"tau and frame_rate must be positive (tau={tau}, frame_rate={frame_rate})")
    product = tau * frame_rate
    nearest = round(product)
    # guard against 0.2 * 6125 style products landing one ulp under an integer
    if math.isclose(product, nearest, rel_tol=1e-12, abs_tol=0.0):
        return int(nearest)
    return int(math.floor(product))


@dataclass
class ExposureImage:
    accumulator: np.ndarray
    frames_integrated: int
    tau: float
    frame_rate: float
    start_frame: int = 0
    partial: bool = False

    @property
    def n(self) -> int:
        return self.accumulator.shape[0]


def _accumulate(items, start_frame: int, tau: float, frame_rate: float, expected: int) -> ExposureImage:
    acc = None
    count = 0
    for frame, intensity in items:
        if acc is None:
            acc = np.zeros(np.shape(frame), dtype=np.float64)
        acc += np.asarray(frame, dtype=np.float64) * float(intensity)
        count += 1
    if acc is None:
        acc = np.zeros((0, 0), dtype=np.float64)
    return ExposureImage(acc, count, tau, frame_rate, start_frame, partial=count < expected)


def integrate_exposure(pattern_stream: Iterable, tau: float, frame_rate: float) -> ExposureImage:
    """Sum ``A_i * I_i`` over the first ``floor(tau * frame_rate)`` stream items.

    A stream that ends early yields a result with ``partial=True``.
    """
    length = window_length(tau, frame_rate)
    return _accumulate(islice(pattern_stream, length), 0, tau, frame_rate, length)


def sliding_persistence(pattern_stream: Iterable, tau: float, frame_rate: float, stride_frames: int) -> list[ExposureImage]:
    """Persistence windows starting every ``stride_frames`` frames.

    Only complete windows are returned. Each window is summed afresh in frame
    order so every image is bit-identical to :func:`integrate_exposure` on the
    same frames.
    """
    if stride_frames < 1:
        raise ValueError(f"stride_frames must be >= 1, got {stride_frames}")
    length = window_length(tau, frame_rate)
    buffer: deque = deque(maxlen=length)
    out = []
    for index, item in enumerate(pattern_stream):
        buffer.append(item)
        start = index + 1 - length
        if start >= 0 and start % stride_frames == 0:
            out.append(_accumulate(buffer, start, tau, frame_rate, length))
    return out


def back_project(mask: MaskSequence, values) -> np.ndarray:
    """``A^T v``: image whose pixel p is the sum of ``v_i`` over frames lighting p."""
    seg = mask.segment_view(np.asarray(values, dtype=np.float64))
    out = np.zeros((mask.k, mask.n, mask.block_width), dtype=np.float64)
    for j in range(mask.block_width):
        out += seg[:, :, j:j + 1] * mask.s[j]
    return out.transpose(1, 0, 2).reshape(mask.n, mask.n)


def traditional_g2(mask: MaskSequence, T_vector) -> np.ndarray:
    """Constant-intensity correlation image ``sum_i A_i T_i``."""
    T_vector = np.asarray(T_vector, dtype=np.float64)
    if T_vector.shape != (mask.M,):
        raise ValueError(f"need {mask.M} transmissivities, got {T_vector.shape[0] if T_vector.ndim else 'scalar'}")
    return back_project(mask, T_vector)


def closed_form_intensities(T, controller: ControllerConfig, clamp_zero: bool = True) -> np.ndarray:
    T = np.asarray(T, dtype=np.float64)
    if isinstance(controller, DigitalControllerConfig) and not clamp_zero:
        zero = np.flatnonzero(T <= 0)
        if zero.size:
            raise ZeroTransmissivityError(zero.tolist())
    return np.asarray(controller.fixed_point(T), dtype=np.float64)


def closed_form_feedback_g2(mask: MaskSequence, scene: Scene, controller: ControllerConfig, clamp_zero: bool = True) -> np.ndarray:
    """Analytic steady-state image ``A^T f(T)`` without simulating the loop.

    ``f`` is ``b/T`` (digital) or ``U/(1+T)`` (analog) under the controller's
    clamp. With ``clamp_zero=False`` a digital frame with ``T = 0`` is an error
    rather than a saturation at ``i_max``.
    """
    T = transmissivities(mask, scene)
    return back_project(mask, closed_form_intensities(T, controller, clamp_zero))


def segment_recover_exact(s: np.ndarray, T_segment, norm: float, snap: float | None = 1e-9) -> np.ndarray:
    """Invert one row-segment: solve ``S x = norm * T``.

    Noise-free bucket counts of a binary segment are integers, so readings
    within ``snap`` of an integer are rounded first; the S-matrix inverse has a
    power-of-two prefactor, which then makes the solve exact.
    """
    s = np.asarray(s)
    y = float(norm) * np.asarray(T_segment, dtype=np.float64)
    if y.shape != (s.shape[0],):
        raise ValueError(f"segment needs {s.shape[0]} readings, got {y.shape}")
    if snap is not None:
        nearest = np.rint(y)
        y = np.where(np.abs(y - nearest) <= snap, nearest, y)
    inv = s_matrix_inverse(s)
    x = np.zeros(s.shape[0])
    for j in range(s.shape[0]):
        x += inv[:, j] * y[j]
    return x


@dataclass
class NoiseSensitivity:
    exact_image: np.ndarray
    first_order_image: np.ndarray
    clean_image: np.ndarray
    residual_norm: float

    @property
    def first_order_error(self) -> np.ndarray:
        return self.first_order_image - self.clean_image

    @property
    def noise_error(self) -> np.ndarray:
        return self.exact_image - self.clean_image


def noise_sensitivity(mask: MaskSequence, scene: Scene, b: float, dT, i_max: float | None = None, limit: float = 0.2) -> NoiseSensitivity:
    """Compare the exact noisy image ``A^T (b/(T - dT))`` to its first-order expansion.

    ``residual_norm = |exact - first_order| / |exact - clean|`` measures how much
    the terms beyond first order contribute. Frames with ``T = 0`` take
    intensity ``i_max`` in all three images (they need ``dT = 0``).
    """
    T = transmissivities(mask, scene)
    dT = np.broadcast_to(np.asarray(dT, dtype=np.float64), T.shape)
    over = np.flatnonzero(np.abs(dT) > limit * T)
    if over.size:
        i = int(over[0])
        raise NoisePreconditionError(i, f"|dT|={abs(dT[i]):.3g} exceeds {limit} * T = {limit * T[i]:.3g}")
    zero = T <= 0
    if zero.any() and i_max is None:
        raise ZeroTransmissivityError(np.flatnonzero(zero).tolist())
    safe_T = np.where(zero, 1.0, T)
    clean = np.where(zero, i_max if i_max is not None else 0.0, b / safe_T)
    exact = np.where(zero, clean, b / (safe_T - dT))
    first = np.where(zero, clean, clean * (1.0 + dT / safe_T))
    exact_img = back_project(mask, exact)
    first_img = back_project(mask, first)
    clean_img = back_project(mask, clean)
    denom = np.linalg.norm(exact_img - clean_img)
    residual = float(np.linalg.norm(exact_img - first_img) / denom) if denom > 0 else 0.0
    return NoiseSensitivity(exact_img, first_img, clean_img, residual)


def visibility(image, region=None) -> float:
    """``(max - min) / (max + min)`` over ``region`` (index/boolean mask); 0 when both are 0."""
    values = np.asarray(image, dtype=np.float64)
    if region is not None:
        values = values[region]
    if values.size == 0:
        raise ValueError("visibility region is empty")
    hi, lo = float(values.max()), float(values.min())
    if hi + lo == 0.0:
        return 0.0
    return (hi - lo) / (hi + lo)


def segment_visibilities(image, block_width: int) -> np.ndarray:
    """Visibility of every row-segment, shape ``(n, k)``."""
    image = np.asarray(image, dtype=np.float64)
    n = image.shape[0]
    k = n // block_width
    seg = image.reshape(n, k, block_width)
    hi, lo = seg.max(axis=2), seg.min(axis=2)
    total = hi + lo
    return np.where(total == 0, 0.0, (hi - lo) / np.where(total == 0, 1.0, total))


def pearson(a, b) -> tuple[float, bool]:
    """Pearson correlation and a flag set when either input is constant (value 0)."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    da, db = a - a.mean(), b - b.mean()
    denom = math.sqrt(float(np.dot(da, da)) * float(np.dot(db, db)))
    if denom == 0.0:
        return 0.0, True
    return float(np.clip(np.dot(da, db) / denom, -1.0, 1.0)), False


@dataclass
class NegativeImageCheck:
    pearson: float
    per_segment_ordering_ok: bool
    degenerate: bool = False
    mixed_segments: int = 0
    ordered_segments: int = 0


def negative_image_check(reconstruction, scene: Scene, block_width: int | None = None) -> NegativeImageCheck:
    """Is the reconstruction a negative of the object?

    Inside every row-segment holding both object (x = 1) and background
    (x = 0) pixels, the mean reconstruction over object pixels must lie strictly
    below the mean over background pixels. ``block_width`` defaults to whole rows.
    """
    image = np.asarray(reconstruction, dtype=np.float64)
    if image.shape != scene.grid.shape:
        raise ValueError(f"reconstruction shape {image.shape} does not match scene {scene.grid.shape}")
    n = scene.n
    width = n if block_width is None else block_width
    r, degenerate = pearson(image, scene.grid)
    segs = image.reshape(n, n // width, width)
    xs = scene.grid.reshape(n, n // width, width)
    mixed = ordered = 0
    for row in range(n):
        for block in range(n // width):
            x, v = xs[row, block], segs[row, block]
            obj, bg = x == 1.0, x == 0.0
            if not obj.any() or not bg.any():
                continue
            mixed += 1
            if v[obj].mean() < v[bg].mean():
                ordered += 1
    return NegativeImageCheck(r, ordered == mixed, degenerate, mixed, ordered)


@dataclass
class ReconstructionReport:
    image: np.ndarray = field(repr=False)
    mode: str
    visibility: float
    pearson_vs_object: float
    mse_vs_oracle: float
    degenerate: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown reconstruction mode {self.mode!r}")


def make_report(image, mode: str, scene: Scene, oracle, block_width: int) -> ReconstructionReport:
    image = np.asarray(image, dtype=np.float64)
    r, degenerate = pearson(image, scene.grid)
    mse = float(np.mean((image - np.asarray(oracle, dtype=np.float64)) ** 2))
    vis = float(segment_visibilities(image, block_width).mean())
    return ReconstructionReport(image, mode, vis, r, mse, degenerate)
