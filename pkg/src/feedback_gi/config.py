"""Experiment configuration: JSON schema, defaults and up-front validation.

Schema (unknown keys are errors)::

    {
      "n": 35, "k": 5,
      "scene": {"letter": "X"} | {"letters": ["X", "J"]} | {"file": "object.pgm"},
      "motion": null | {"dx": 7, "dy": 0, "wrap": true},
      "controller": {
        "mode": "analog" | "digital",
        "digital": {"b": 0.0008, "delta": 0.002},
        "analog": {"U": 1.0, "relaxation": 0.5, "scheme": "implicit"},
        "i_min": 0.001, "i_max": 10.0, "max_steps": 350, "tol": 1e-9,
        "initial_intensity": null
      },
      "noise": {"kind": "none", "amplitude": 0.0},
      "exposure": {"tau": 0.2, "frame_rate": null, "stride_frames": null,
                   "windows": 1, "frames": null},
      "outputs": {"directory": "out", "emit_images": true,
                  "emit_traces": true, "emit_metrics": true},
      "seed": 0
    }

``frame_rate`` defaults to ``M / tau`` (one full sequence per window),
``stride_frames`` to the window length, ``max_steps`` to ``10 * n`` and
``frames`` to exactly what ``windows`` needs.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .feedback import AnalogControllerConfig, ControllerConfigError, DigitalControllerConfig
from .imaging import window_length
from .mask import MaskError, MaskSequence, build_mask_sequence
from .optics import NoiseModel
from .scene import LETTERS, MotionDescriptor, Scene, SceneError, letter_stencil, load_scene

OUTPUT_DIR_ENV = "FEEDBACK_GI_OUTPUT_DIR"


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid config:\n" + "\n".join(f"  {e}" for e in self.errors))


@dataclass(frozen=True)
class ControllerSection:
    mode: str
    digital: DigitalControllerConfig | None
    analog: AnalogControllerConfig | None
    max_steps: int
    tol: float
    initial_intensity: float | None

    def get(self, mode: str):
        return self.digital if mode == "digital" else self.analog


@dataclass(frozen=True)
class ExposureSection:
    tau: float
    frame_rate: float
    stride_frames: int
    windows: int
    frames: int

    @property
    def window_frames(self) -> int:
        return window_length(self.tau, self.frame_rate)

    @property
    def frames_needed(self) -> int:
        return self.window_frames + (self.windows - 1) * self.stride_frames


@dataclass(frozen=True)
class OutputSection:
    directory: str
    emit_images: bool = True
    emit_traces: bool = True
    emit_metrics: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    k: int
    scenes: tuple[Scene, ...] = field(repr=False)
    scene_spec: dict
    motion: MotionDescriptor | None
    controller: ControllerSection
    noise: NoiseModel
    exposure: ExposureSection
    outputs: OutputSection
    seed: int
    mask: MaskSequence = field(repr=False)

    def echo(self) -> dict:
        """Resolved config as plain JSON data."""
        ctrl = self.controller
        return {
            "n": self.n,
            "k": self.k,
            "scene": self.scene_spec,
            "motion": asdict(self.motion) if self.motion else None,
            "controller": {
                "mode": ctrl.mode,
                "digital": asdict(ctrl.digital) if ctrl.digital else None,
                "analog": asdict(ctrl.analog) if ctrl.analog else None,
                "max_steps": ctrl.max_steps,
                "tol": ctrl.tol,
                "initial_intensity": ctrl.initial_intensity,
            },
            "noise": {"kind": self.noise.kind, "amplitude": self.noise.amplitude},
            "exposure": asdict(self.exposure),
            "outputs": asdict(self.outputs),
            "seed": self.seed,
        }


class _Reader:
    """Collects field-level errors instead of failing on the first one."""

    def __init__(self):
        self.errors: list[str] = []

    def section(self, data: Any, path: str, allowed: set[str], required: bool = True) -> dict:
        if data is None and not required:
            return {}
        if not isinstance(data, dict):
            self.errors.append(f"{path}: expected an object")
            return {}
        for key in sorted(set(data) - allowed):
            self.errors.append(f"{path}.{key}: unknown key" if path else f"{key}: unknown key")
        return data

    def value(self, data: dict, key: str, path: str, kind, default=..., check=None, message: str = ""):
        where = f"{path}.{key}" if path else key
        if key not in data or data[key] is None:
            if default is ...:
                self.errors.append(f"{where}: required")
                return None
            return default
        v = data[key]
        if kind is float and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        if kind is not None and (not isinstance(v, kind) or (kind is not bool and isinstance(v, bool))):
            self.errors.append(f"{where}: expected {getattr(kind, '__name__', kind)}, got {type(v).__name__}")
            return None
        if check is not None and not check(v):
            self.errors.append(f"{where}: {message or 'invalid value'} (got {v!r})")
            return None
        return v


def _positive(x) -> bool:
    return x > 0


def parse_config(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    r = _Reader()
    top = r.section(data, "", {"n", "k", "scene", "motion", "controller", "noise", "exposure", "outputs", "seed"})
    n = r.value(top, "n", "", int, check=_positive, message="must be positive")
    k = r.value(top, "k", "", int, check=_positive, message="must be positive")
    seed = r.value(top, "seed", "", int, default=0, check=lambda s: s >= 0, message="must be non-negative")

    mask = None
    if n is not None and k is not None:
        try:
            mask = build_mask_sequence(n, k)
        except MaskError as exc:
            r.errors.append(f"n/k: {exc}")

    # scene
    scene_data = r.section(top.get("scene"), "scene", {"letter", "letters", "file"})
    scenes: list[Scene] = []
    present = [key for key in ("letter", "letters", "file") if key in scene_data]
    if len(present) != 1:
        r.errors.append("scene: give exactly one of letter, letters, file")
    elif n is not None:
        try:
            if "letter" in scene_data:
                letter = r.value(scene_data, "letter", "scene", str)
                if letter is not None:
                    scenes.append(letter_stencil(letter, n))
            elif "letters" in scene_data:
                letters = scene_data["letters"]
                if not isinstance(letters, list) or not letters or not all(isinstance(c, str) for c in letters):
                    r.errors.append(f"scene.letters: expected a non-empty list of letters from {list(LETTERS)}")
                else:
                    scenes.extend(letter_stencil(c, n) for c in letters)
            else:
                path = r.value(scene_data, "file", "scene", str)
                if path is not None:
                    p = Path(path)
                    if not p.is_absolute() and base_dir is not None:
                        p = base_dir / p
                    if not p.exists():
                        r.errors.append(f"scene.file: {p} does not exist")
                    else:
                        sc = load_scene(p, label=p.stem)
                        if sc.n != n:
                            r.errors.append(f"scene.file: image is {sc.n}x{sc.n}, expected n={n}")
                        else:
                            scenes.append(sc)
        except (SceneError, ValueError) as exc:
            r.errors.append(f"scene: {exc}")

    # motion
    motion = None
    if top.get("motion") is not None:
        md = r.section(top["motion"], "motion", {"dx", "dy", "wrap"})
        dx = r.value(md, "dx", "motion", int, default=0)
        dy = r.value(md, "dy", "motion", int, default=0)
        wrap = r.value(md, "wrap", "motion", bool, default=True)
        if None not in (dx, dy, wrap):
            motion = MotionDescriptor(dx, dy, wrap)
            if n is not None:
                try:
                    motion.validate(n)
                except SceneError as exc:
                    r.errors.append(f"motion: {exc}")

    # controller
    cd = r.section(top.get("controller"), "controller",
                   {"mode", "digital", "analog", "i_min", "i_max", "max_steps", "tol", "initial_intensity"})
    mode = r.value(cd, "mode", "controller", str, default="analog", check=lambda m: m in ("analog", "digital"),
                   message="must be 'analog' or 'digital'")
    i_min = r.value(cd, "i_min", "controller", float, default=1e-3)
    i_max = r.value(cd, "i_max", "controller", float, default=10.0)
    max_steps = r.value(cd, "max_steps", "controller", int, default=10 * n if n else 1000, check=_positive,
                        message="must be >= 1")
    tol = r.value(cd, "tol", "controller", float, default=1e-9, check=_positive, message="must be > 0")
    initial = r.value(cd, "initial_intensity", "controller", float, default=None)
    digital = analog = None
    if cd.get("digital") is not None:
        dd = r.section(cd["digital"], "controller.digital", {"b", "delta"})
        b = r.value(dd, "b", "controller.digital", float)
        delta = r.value(dd, "delta", "controller.digital", float, default=None)
        if b is not None and i_min is not None and i_max is not None:
            try:
                digital = DigitalControllerConfig(b=b, delta=delta, i_min=i_min, i_max=i_max)
            except ControllerConfigError as exc:
                r.errors.append(f"controller.digital: {exc}")
    if cd.get("analog") is not None:
        ad = r.section(cd["analog"], "controller.analog", {"U", "relaxation", "scheme"})
        U = r.value(ad, "U", "controller.analog", float)
        lam = r.value(ad, "relaxation", "controller.analog", float, default=0.5)
        scheme = r.value(ad, "scheme", "controller.analog", str, default="implicit")
        if None not in (U, lam, scheme, i_min, i_max):
            try:
                analog = AnalogControllerConfig(U=U, relaxation=lam, i_min=i_min, i_max=i_max, scheme=scheme)
            except ControllerConfigError as exc:
                r.errors.append(f"controller.analog: {exc}")
    if mode is not None and cd.get(mode) is None:
        r.errors.append(f"controller.{mode}: required for mode {mode!r}")
    if initial is not None and i_min is not None and i_max is not None and not i_min <= initial <= i_max:
        r.errors.append(f"controller.initial_intensity: must lie in [i_min, i_max] (got {initial})")

    # noise
    nd = r.section(top.get("noise"), "noise", {"kind", "amplitude"}, required=False)
    kind = r.value(nd, "kind", "noise", str, default="none")
    amplitude = r.value(nd, "amplitude", "noise", float, default=0.0)
    noise = NoiseModel()
    if kind is not None and amplitude is not None:
        try:
            noise = NoiseModel(kind=kind, amplitude=amplitude, seed=seed or 0)
        except ValueError as exc:
            r.errors.append(f"noise: {exc}")

    # exposure
    ed = r.section(top.get("exposure"), "exposure", {"tau", "frame_rate", "stride_frames", "windows", "frames"},
                   required=False)
    tau = r.value(ed, "tau", "exposure", float, default=0.2, check=_positive, message="must be > 0")
    frame_rate = r.value(ed, "frame_rate", "exposure", float, default=None, check=_positive, message="must be > 0")
    stride = r.value(ed, "stride_frames", "exposure", int, default=None, check=_positive, message="must be >= 1")
    windows = r.value(ed, "windows", "exposure", int, default=1, check=_positive, message="must be >= 1")
    frames = r.value(ed, "frames", "exposure", int, default=None, check=_positive, message="must be >= 1")
    exposure = None
    if mask is not None and tau is not None and windows is not None:
        if frame_rate is None:
            frame_rate = mask.M / tau
        wl = window_length(tau, frame_rate)
        if wl < 1:
            r.errors.append("exposure: tau * frame_rate must cover at least one frame")
        else:
            stride = wl if stride is None else stride
            needed = wl + (windows - 1) * stride
            exposure = ExposureSection(tau, frame_rate, stride, windows, needed if frames is None else frames)

    # outputs
    od = r.section(top.get("outputs"), "outputs", {"directory", "emit_images", "emit_traces", "emit_metrics"},
                   required=False)
    directory = r.value(od, "directory", "outputs", str, default="out")
    flags = {key: r.value(od, key, "outputs", bool, default=True) for key in ("emit_images", "emit_traces", "emit_metrics")}
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir:
        directory = env_dir
    outputs = OutputSection(directory, **flags)

    if r.errors:
        raise ConfigError(r.errors)

    scene_spec = {key: scene_data[key] for key in present}
    controller = ControllerSection(mode, digital, analog, max_steps, tol, initial)
    return ExperimentConfig(n, k, tuple(scenes), scene_spec, motion, controller, noise, exposure, outputs, seed, mask)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError([f"config file {path} not found"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config file {path} is not valid JSON: {exc}"]) from None
    return parse_config(data, base_dir=path.parent)
