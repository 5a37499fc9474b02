"""Objects as n x n transmissivity grids, plus integer-pixel motion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# 7x7 bitmap font; '#' is a transmissive stroke.
_GLYPHS = {
    "X": (
        "#.....#",
        ".#...#.",
        "..#.#..",
        "...#...",
        "..#.#..",
        ".#...#.",
        "#.....#",
    ),
    "J": (
        "..#####",
        "....#..",
        "....#..",
        "....#..",
        "#...#..",
        "#...#..",
        ".###...",
    ),
    "T": (
        "#######",
        "...#...",
        "...#...",
        "...#...",
        "...#...",
        "...#...",
        "...#...",
    ),
    "U": (
        "#.....#",
        "#.....#",
        "#.....#",
        "#.....#",
        "#.....#",
        "#.....#",
        ".#####.",
    ),
}

LETTERS = tuple(_GLYPHS)
GLYPH_SIZE = 7


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class Scene:
    grid: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        grid = np.array(self.grid, dtype=np.float64)
        if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
            raise SceneError(f"scene grid must be square, got shape {grid.shape}")
        if grid.size and (grid.min() < 0.0 or grid.max() > 1.0 or not np.isfinite(grid).all()):
            raise SceneError("scene transmissivities must lie in [0, 1]")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @property
    def n(self) -> int:
        return self.grid.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.grid, other.grid)

    __hash__ = None


@dataclass(frozen=True)
class MotionDescriptor:
    """Translation in pixels per exposure window."""

    dx: int = 0
    dy: int = 0
    wrap: bool = True

    def validate(self, n: int) -> None:
        if abs(self.dx) > n or abs(self.dy) > n:
            raise SceneError(f"|dx|, |dy| must not exceed n={n} (dx={self.dx}, dy={self.dy})")


def glyph_bitmap(character: str) -> np.ndarray:
    try:
        rows = _GLYPHS[character.upper()]
    except (KeyError, AttributeError):
        raise SceneError(f"unsupported letter {character!r}; choose from {', '.join(LETTERS)}") from None
    return np.array([[c == "#" for c in row] for row in rows], dtype=np.float64)


def letter_stencil(character: str, n: int) -> Scene:
    """Binary letter object, the 7x7 glyph scaled to n x n by nearest neighbour."""
    bitmap = glyph_bitmap(character)
    if n < GLYPH_SIZE:
        raise SceneError(f"letter stencils need n >= {GLYPH_SIZE}, got {n}")
    src = (np.arange(n) * GLYPH_SIZE) // n
    return Scene(bitmap[np.ix_(src, src)], label=character.upper())


def shift_scene(scene: Scene, motion: MotionDescriptor, steps: int = 1) -> Scene:
    motion.validate(scene.n)
    dx, dy = steps * motion.dx, steps * motion.dy
    if motion.wrap:
        grid = np.roll(scene.grid, shift=(dy, dx), axis=(0, 1))
    else:
        n = scene.n
        grid = np.zeros_like(scene.grid)
        if abs(dx) < n and abs(dy) < n:
            src_rows = slice(max(0, -dy), n - max(0, dy))
            dst_rows = slice(max(0, dy), n - max(0, -dy))
            src_cols = slice(max(0, -dx), n - max(0, dx))
            dst_cols = slice(max(0, dx), n - max(0, -dx))
            grid[dst_rows, dst_cols] = scene.grid[src_rows, src_cols]
    return Scene(grid, label=scene.label)


def scene_from_array(values, label: str = "", maxval: int = 255) -> Scene:
    """Map integer grey levels ``0..maxval`` linearly onto ``[0, 1]``."""
    arr = np.asarray(values, dtype=np.float64)
    return Scene(arr / float(maxval), label=label)


def load_scene(path, label: str | None = None) -> Scene:
    from .pgm import read_pgm

    pixels, maxval = read_pgm(path)
    if pixels.shape[0] != pixels.shape[1]:
        raise SceneError(f"scene image {path} must be square, got {pixels.shape[1]}x{pixels.shape[0]}")
    return scene_from_array(pixels, label=label if label is not None else str(path), maxval=maxval)
