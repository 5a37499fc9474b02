"""Block-scanning Hadamard illumination masks.

The n x n field is cut into ``k`` column blocks of width ``N_Block = n / k``.
Each row of each block (a *row-segment*) is scanned with the complete set of
rows of the order-``N_Block`` S-matrix, so one full sequence holds
``n * k * N_Block = n**2`` binary frames.

Frame order is fixed: blocks left to right, rows top to bottom, S-matrix rows
in index order. Frame ``i`` therefore lights segment ``(block, row)`` with
S-matrix row ``j`` where ``i = (block * n + row) * N_Block + j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

FRAME_ORDER = "block-major, row, s-matrix-row"


class MaskError(ValueError):
    """Invalid mask parameters."""


class DegenerateContrastError(ZeroDivisionError):
    """The block-contrast formula has a zero denominator."""


def _is_power_of_two(value: int) -> bool:
    return value >= 1 and (value & (value - 1)) == 0


def hadamard_matrix(order: int) -> np.ndarray:
    """Sylvester Hadamard matrix of the given order (entries +1/-1, int64)."""
    if not isinstance(order, (int, np.integer)) or not _is_power_of_two(int(order)):
        raise MaskError(f"Hadamard order must be a power of two >= 1, got {order!r}")
    h = np.ones((1, 1), dtype=np.int64)
    while h.shape[0] < order:
        h = np.block([[h, h], [h, -h]])
    h.setflags(write=False)
    return h


def s_matrix(order: int) -> np.ndarray:
    """Binary S-matrix of order ``N`` (``N + 1`` a power of two).

    Built from the normalized Sylvester matrix of order ``N + 1`` by dropping
    its first row and column and mapping -1 to 1, +1 to 0. Every row then has
    ``(N + 1) / 2`` ones and the matrix is invertible.
    """
    if not isinstance(order, (int, np.integer)) or order < 1 or not _is_power_of_two(int(order) + 1):
        raise MaskError(f"S-matrix order N must satisfy N >= 1 and N + 1 a power of two, got {order!r}")
    h = hadamard_matrix(int(order) + 1)
    s = (h[1:, 1:] == -1).astype(np.uint8)
    s.setflags(write=False)
    return s


def s_matrix_inverse(s: np.ndarray) -> np.ndarray:
    """Exact inverse ``2/(N+1) * (2 S^T - J)``; the prefactor is a power of two."""
    order = s.shape[0]
    inv = (2.0 / (order + 1)) * (2.0 * s.T.astype(np.float64) - 1.0)
    inv.setflags(write=False)
    return inv


def hadamard_block_contrast(block_width: int) -> Fraction:
    """Row visibility predicted for block width ``N``: ``(1+N) / (1 + N(2N-5))``.

    Evaluated verbatim as an exact rational; negative values (``N = 1, 2``)
    are returned as is.
    """
    if block_width < 1:
        raise MaskError(f"block width must be >= 1, got {block_width!r}")
    numerator = 1 + block_width
    denominator = 1 + block_width * (2 * block_width - 5)
    if denominator == 0:
        raise DegenerateContrastError(f"contrast formula denominator vanishes at N_Block={block_width}")
    return Fraction(numerator, denominator)


@dataclass(frozen=True)
class MaskSequence:
    """One complete block-scan sequence of ``M = n**2`` binary frames."""

    n: int
    k: int
    block_width: int
    s: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def build(cls, n: int, k: int) -> "MaskSequence":
        return build_mask_sequence(n, k)

    @property
    def n_block(self) -> int:
        return self.block_width

    @property
    def M(self) -> int:
        return self.n * self.k * self.block_width

    def __len__(self) -> int:
        return self.M

    @property
    def ones_per_row(self) -> int:
        return (self.block_width + 1) // 2

    def frame_location(self, index: int) -> tuple[int, int, int]:
        """``(block, row, s_row)`` lit by frame ``index``."""
        if not 0 <= index < self.M:
            raise IndexError(f"frame index {index} out of range for M={self.M}")
        segment, s_row = divmod(index, self.block_width)
        block, row = divmod(segment, self.n)
        return block, row, s_row

    def frame(self, index: int) -> np.ndarray:
        block, row, s_row = self.frame_location(index)
        out = np.zeros((self.n, self.n), dtype=np.uint8)
        lo = block * self.block_width
        out[row, lo:lo + self.block_width] = self.s[s_row]
        return out

    def __iter__(self):
        for i in range(self.M):
            yield self.frame(i)

    @property
    def frames(self) -> np.ndarray:
        """All frames as a read-only ``(M, n, n)`` uint8 array."""
        cached = self.__dict__.get("_frames")
        if cached is None:
            cached = np.zeros((self.M, self.n, self.n), dtype=np.uint8)
            view = cached.reshape(self.k, self.n, self.block_width, self.n, self.n)
            for block in range(self.k):
                lo = block * self.block_width
                for row in range(self.n):
                    view[block, row, :, row, lo:lo + self.block_width] = self.s
            cached.setflags(write=False)
            object.__setattr__(self, "_frames", cached)
        return cached

    def segment_view(self, values: np.ndarray) -> np.ndarray:
        """Reshape a length-M per-frame vector to ``(k, n, N_Block)``."""
        values = np.asarray(values)
        if values.shape != (self.M,):
            raise MaskError(f"expected {self.M} per-frame values, got shape {values.shape}")
        return values.reshape(self.k, self.n, self.block_width)

    def manifest(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "N_Block": self.block_width,
            "M": self.M,
            "frame_order": FRAME_ORDER,
        }


def build_mask_sequence(n: int, k: int) -> MaskSequence:
    if n < 1 or k < 1:
        raise MaskError(f"n and k must be positive (n={n}, k={k})")
    if n % k:
        raise MaskError(f"k must divide n (n={n}, k={k})")
    width = n // k
    if not _is_power_of_two(width + 1):
        raise MaskError(f"N_Block + 1 must be a power of two (N_Block = n/k = {width})")
    return MaskSequence(n=n, k=k, block_width=width, s=s_matrix(width))
