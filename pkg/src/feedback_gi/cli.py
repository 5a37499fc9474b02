"""Command line experiment runner.

    feedback-gi run config.json
    feedback-gi compare config.json
    feedback-gi mask export 35 5 masks/
    feedback-gi metrics --help

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import OUTPUT_DIR_ENV, ConfigError, ExperimentConfig, load_config
from .imaging import integrate_exposure, make_report, segment_visibilities, sliding_persistence
from .mask import MaskError, MaskSequence, build_mask_sequence, hadamard_block_contrast
from .pgm import atomic_write_text, sha256_file, write_image, write_json, write_pgm
from .pipeline import LoopTrace, closed_form_trace, pattern_stream, run_feedback_loop, run_traditional

log = logging.getLogger("feedback_gi")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

METRIC_COLUMNS = ("mode", "scene", "pearson", "visibility_mean", "mse_vs_oracle", "frames", "seed")
TRACE_COLUMNS = ("frame_index", "T", "I_settled", "steps", "flag")
VISIBILITY_COLUMNS = ("window", "row", "block", "visibility", "predicted_contrast")

METRICS_DOC = """\
metrics.csv columns (one row per mode, scene and persistence window):
  mode             naked_eye_digital | naked_eye_analog | traditional | closed_form_oracle
  scene            scene label; '@wNNN' suffix marks the window index when windows > 1
  pearson          Pearson correlation of the image with the object (negative = negative image)
  visibility_mean  mean over row-segments of (max - min) / (max + min)
  mse_vs_oracle    mean squared pixel difference to the analytic image of the same frames
  frames           frames integrated in the window
  seed             top-level seed of the run

*_trace.csv columns (one row per displayed frame):
  frame_index, T (transmissivity), I_settled (settled intensity, or bucket value
  for the traditional baseline), steps (controller steps), flag (settled | hit_max |
  constant | closed_form)

*_visibility.csv columns: window, row, block, visibility, predicted_contrast
  (predicted_contrast is the block-contrast formula for the mask's block width)
"""


@dataclass
class RunManifest:
    command: str
    config: dict
    versions: dict
    outputs: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    duration_seconds: float = 0.0
    rows: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "versions": self.versions,
            "outputs": self.outputs,
            "warnings": self.warnings,
            "duration_seconds": self.duration_seconds,
        }


def _versions() -> dict:
    return {"feedback_gi": __version__, "numpy": np.__version__, "python": platform.python_version()}


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


class _Emitter:
    def __init__(self, root: Path, manifest: RunManifest):
        self.root = root
        self.manifest = manifest

    def _record(self, path: Path) -> None:
        self.manifest.outputs[str(path.relative_to(self.root))] = sha256_file(path)

    def csv(self, name: str, columns, rows) -> None:
        path = self.root / name
        atomic_write_text(path, _csv_text(columns, rows))
        self._record(path)

    def image(self, name: str, image) -> None:
        for path in write_image(self.root / name, image):
            self._record(path)


def _windows(mask: MaskSequence, trace: LoopTrace, cfg: ExperimentConfig):
    exp = cfg.exposure
    return sliding_persistence(pattern_stream(mask, trace), exp.tau, exp.frame_rate, exp.stride_frames)


def _stream_traces(cfg: ExperimentConfig, scene, modes):
    """``{mode: (measured trace, oracle trace)}`` for each requested mode.

    The closed-form row reuses the oracle of the configured controller, so it
    is compared against itself.
    """
    mask = cfg.mask
    ctrl = cfg.controller
    common = dict(n_frames=cfg.exposure.frames, motion=cfg.motion, frames_per_shift=cfg.exposure.window_frames)
    primary = "naked_eye_digital" if ctrl.mode == "digital" else "naked_eye_analog"
    wanted = [m for m in modes if m != "closed_form_oracle"]
    if "closed_form_oracle" in modes and primary not in wanted:
        wanted.append(primary)
    out = {}
    for mode in wanted:
        if mode == "traditional":
            out[mode] = (run_traditional(mask, scene, noise=cfg.noise, **common), run_traditional(mask, scene, **common))
        else:
            controller = ctrl.get("digital" if mode == "naked_eye_digital" else "analog")
            trace = run_feedback_loop(mask, scene, controller, noise=cfg.noise, max_steps=ctrl.max_steps, tol=ctrl.tol,
                                      initial=ctrl.initial_intensity, **common)
            out[mode] = (trace, closed_form_trace(trace, controller))
    if "closed_form_oracle" in modes:
        oracle = out[primary][1]
        out["closed_form_oracle"] = (oracle, oracle)
    return out


def _evaluate(cfg: ExperimentConfig, modes, emit: _Emitter, warnings: list):
    mask = cfg.mask
    width = mask.block_width
    predicted = float(hadamard_block_contrast(width))
    metric_rows = []
    many = cfg.exposure.windows > 1
    for scene in cfg.scenes:
        traces = _stream_traces(cfg, scene, modes)
        for mode in modes:
            trace, oracle = traces[mode]
            windows = _windows(mask, trace, cfg)
            oracle_windows = _windows(mask, oracle, cfg)
            if len(windows) < cfg.exposure.windows:
                warnings.append(f"{scene.label}/{mode}: partial exposure, {len(windows)} of "
                                f"{cfg.exposure.windows} windows complete ({len(trace)} frames)")
            if not windows:
                exp = cfg.exposure
                windows = [integrate_exposure(pattern_stream(mask, trace), exp.tau, exp.frame_rate)]
                oracle_windows = [integrate_exposure(pattern_stream(mask, oracle), exp.tau, exp.frame_rate)]
            vis_rows = []
            for w, (win, orc) in enumerate(zip(windows, oracle_windows)):
                shown = trace.scenes[int(trace.shift_index[win.start_frame])]
                report = make_report(win.accumulator, mode, shown, orc.accumulator, width)
                label = f"{scene.label}@w{w:03d}" if many else scene.label
                metric_rows.append((mode, label, report.pearson_vs_object, report.visibility, report.mse_vs_oracle,
                                    win.frames_integrated, cfg.seed))
                if report.degenerate:
                    warnings.append(f"{label}/{mode}: constant image or object, pearson reported as 0")
                if cfg.outputs.emit_images:
                    suffix = f"_w{w:03d}" if many else ""
                    emit.image(f"{scene.label}_{mode}{suffix}.pgm", win.accumulator)
                vis = segment_visibilities(win.accumulator, width)
                vis_rows.extend((w, row, block, vis[row, block], predicted)
                                for row in range(vis.shape[0]) for block in range(vis.shape[1]))
            if cfg.outputs.emit_traces and mode != "closed_form_oracle":
                emit.csv(f"{scene.label}_{mode}_trace.csv", TRACE_COLUMNS, trace.rows())
            if cfg.outputs.emit_metrics:
                emit.csv(f"{scene.label}_{mode}_visibility.csv", VISIBILITY_COLUMNS, vis_rows)
    if cfg.outputs.emit_metrics:
        emit.csv("metrics.csv", METRIC_COLUMNS, metric_rows)
    return metric_rows


def _execute(cfg: ExperimentConfig, command: str, modes) -> RunManifest:
    start = time.perf_counter()
    root = Path(cfg.outputs.directory)
    root.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(command, cfg.echo(), _versions())
    emit = _Emitter(root, manifest)
    rows = _evaluate(cfg, modes, emit, manifest.warnings)
    for warning in manifest.warnings:
        log.warning(warning)
    manifest.duration_seconds = time.perf_counter() - start
    write_json(root / "manifest.json", manifest.to_json())
    manifest.rows = rows
    return manifest


def run_experiment(cfg: ExperimentConfig) -> RunManifest:
    """Run the configured controller and write images, traces, metrics and a manifest."""
    mode = "naked_eye_digital" if cfg.controller.mode == "digital" else "naked_eye_analog"
    return _execute(cfg, "run", [mode])


def compare_modes(cfg: ExperimentConfig) -> RunManifest:
    """Traditional, digital, analog and closed-form images of the same scenes."""
    missing = [m for m in ("digital", "analog") if cfg.controller.get(m) is None]
    if missing:
        raise ConfigError([f"controller.{m}: required by compare" for m in missing])
    return _execute(cfg, "compare", ["traditional", "naked_eye_digital", "naked_eye_analog", "closed_form_oracle"])


def export_mask(n: int, k: int, directory) -> Path:
    """Write every frame as an 8-bit PGM (0/255) plus ``manifest.json``."""
    mask = build_mask_sequence(n, k)
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    digits = max(5, len(str(mask.M - 1)))
    for i in range(mask.M):
        write_pgm(root / f"frame_{i:0{digits}d}.pgm", mask.frame(i) * np.uint8(255))
    return write_json(root / "manifest.json", mask.manifest())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feedback-gi", description="Photoelectric-feedback ghost imaging simulator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one controller on the configured scene(s)")
    p.add_argument("config", type=Path)
    p = sub.add_parser("compare", help="compare traditional, digital, analog and closed-form images")
    p.add_argument("config", type=Path)

    p = sub.add_parser("mask", help="mask utilities")
    mask_sub = p.add_subparsers(dest="mask_command", required=True)
    e = mask_sub.add_parser("export", help="export a mask sequence as PGM frames")
    e.add_argument("n", type=int)
    e.add_argument("k", type=int)
    e.add_argument("directory", type=Path)

    sub.add_parser("metrics", help="describe the CSV outputs", description=METRICS_DOC,
                   formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.epilog = f"Set {OUTPUT_DIR_ENV} to override outputs.directory."
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "metrics":
            print(METRICS_DOC, end="")
            return EXIT_OK
        if args.command == "mask":
            path = export_mask(args.n, args.k, args.directory)
            print(path)
            return EXIT_OK
        cfg = load_config(args.config)
        manifest = run_experiment(cfg) if args.command == "run" else compare_modes(cfg)
        print(Path(cfg.outputs.directory) / "manifest.json")
        return EXIT_OK
    except (ConfigError, MaskError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
