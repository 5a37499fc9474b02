"""End-to-end measurement streams: mask + scene + controller -> displayed patterns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .feedback import ControllerConfig, DigitalControllerConfig, settle
from .imaging import closed_form_intensities
from .mask import MaskSequence
from .optics import NO_NOISE, NoiseModel, transmissivities
from .scene import MotionDescriptor, Scene, shift_scene

# noise sub-streams per pipeline, split from the single top-level seed
NOISE_STREAMS = {"naked_eye_digital": 1, "naked_eye_analog": 2, "traditional": 3}


@dataclass
class LoopTrace:
    """Per-frame record of one measurement stream, in frame order.

    ``weights`` is what the screen shows for each frame: the settled intensity
    for the feedback loops, the bucket value for the traditional baseline.
    """

    mode: str
    mask_index: np.ndarray
    shift_index: np.ndarray
    T: np.ndarray
    weights: np.ndarray
    steps: np.ndarray
    flags: list[str]
    scenes: list[Scene] = field(repr=False)

    def __len__(self) -> int:
        return len(self.mask_index)

    @property
    def frame_index(self) -> np.ndarray:
        return np.arange(len(self))

    def rows(self):
        for i in range(len(self)):
            yield i, float(self.T[i]), float(self.weights[i]), int(self.steps[i]), self.flags[i]


def frame_schedule(mask: MaskSequence, scene: Scene, n_frames: int | None = None, motion: MotionDescriptor | None = None,
                   frames_per_shift: int | None = None):
    """Cycle the mask sequence over ``n_frames`` frames, moving the scene every
    ``frames_per_shift`` frames. Returns ``(mask_index, shift_index, T, scenes)``."""
    total = mask.M if n_frames is None else int(n_frames)
    if total < 1:
        raise ValueError("need at least one frame")
    mask_index = np.arange(total) % mask.M
    if motion is None or (motion.dx == 0 and motion.dy == 0):
        shift_index = np.zeros(total, dtype=np.int64)
    else:
        per = mask.M if frames_per_shift is None else int(frames_per_shift)
        shift_index = np.arange(total) // per
    scenes = [shift_scene(scene, motion, s) if motion is not None else scene for s in range(int(shift_index[-1]) + 1)]
    per_scene_T = [transmissivities(mask, sc) for sc in scenes]
    T = np.array([per_scene_T[s][m] for s, m in zip(shift_index, mask_index)], dtype=np.float64)
    return mask_index, shift_index, T, scenes


def run_feedback_loop(mask: MaskSequence, scene: Scene, controller: ControllerConfig, *, n_frames: int | None = None,
                      motion: MotionDescriptor | None = None, frames_per_shift: int | None = None,
                      noise: NoiseModel = NO_NOISE, max_steps: int | None = None, tol: float = 1e-9,
                      initial: float | None = None) -> LoopTrace:
    """Settle the controller independently for every frame of the stream."""
    mask_index, shift_index, T, scenes = frame_schedule(mask, scene, n_frames, motion, frames_per_shift)
    mode = "naked_eye_digital" if isinstance(controller, DigitalControllerConfig) else "naked_eye_analog"
    rng = noise.rng(NOISE_STREAMS[mode]) if noise.enabled else None
    result = settle(controller, T, max_steps=10 * mask.n if max_steps is None else max_steps, tol=tol,
                    initial=initial, noise=noise, rng=rng)
    return LoopTrace(mode, mask_index, shift_index, T, np.asarray(result.intensity), np.asarray(result.steps),
                     result.flags, scenes)


def run_traditional(mask: MaskSequence, scene: Scene, *, intensity: float = 1.0, n_frames: int | None = None,
                    motion: MotionDescriptor | None = None, frames_per_shift: int | None = None,
                    noise: NoiseModel = NO_NOISE) -> LoopTrace:
    """Constant-intensity baseline: each pattern is weighted by its bucket value."""
    mask_index, shift_index, T, scenes = frame_schedule(mask, scene, n_frames, motion, frames_per_shift)
    dT = noise.draw(T, noise.rng(NOISE_STREAMS["traditional"])) if noise.enabled else 0.0
    B = np.maximum(0.0, intensity * (T - dT))
    return LoopTrace("traditional", mask_index, shift_index, T, B, np.zeros(len(T), dtype=np.int64),
                     ["constant"] * len(T), scenes)


def closed_form_trace(trace: LoopTrace, controller: ControllerConfig) -> LoopTrace:
    """Same frames as ``trace`` with analytic steady-state intensities."""
    weights = closed_form_intensities(trace.T, controller)
    return LoopTrace("closed_form_oracle", trace.mask_index, trace.shift_index, trace.T, weights,
                     np.zeros(len(trace), dtype=np.int64), ["closed_form"] * len(trace), trace.scenes)


def pattern_stream(mask: MaskSequence, trace: LoopTrace):
    """Yield ``(A_i, weight_i)`` for every frame of ``trace``."""
    frames = mask.frames
    for m, w in zip(trace.mask_index, trace.weights):
        yield frames[m], float(w)

