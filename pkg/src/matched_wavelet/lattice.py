"""Quincunx decimation matrix and coset masks.

Downsampling by ``M`` followed by upsampling by ``M`` is realised as a single
in-place zeroing of the samples off the retained coset, so every signal in the
filter bank stays on the full ``H x W`` grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DecimationMatrix:
    """A 2x2 integer sampling matrix with ``|det| == 2``."""

    entries: tuple[tuple[int, int], tuple[int, int]]

    def __post_init__(self):
        arr = np.asarray(self.entries)
        if arr.shape != (2, 2) or not np.issubdtype(arr.dtype, np.integer):
            raise ValueError("decimation matrix must be a 2x2 integer matrix")
        if abs(self.determinant) != 2:
            raise ValueError(
                f"|det| must be 2 for a two-channel system, got {self.determinant}"
            )

    @property
    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)

    @property
    def determinant(self) -> int:
        (a, b), (c, d) = self.entries
        return a * d - b * c

    def power(self, j: int) -> np.ndarray:
        """Integer matrix ``M**j`` (``j >= 0``)."""
        return np.linalg.matrix_power(self.array, j)

    def apply(self, n) -> np.ndarray:
        return self.array @ np.asarray(n, dtype=np.int64)

    def contains(self, x) -> bool:
        """True when ``x = M n`` has an integer solution ``n``."""
        m = self.array
        (a, b), (c, d) = m
        det = self.determinant
        x1, x2 = (int(v) for v in x)
        # adjugate solve keeps everything in exact integer arithmetic
        n1, n2 = d * x1 - b * x2, -c * x1 + a * x2
        return n1 % det == 0 and n2 % det == 0


def quincunx_matrix() -> DecimationMatrix:
    return DecimationMatrix(((1, 1), (1, -1)))


@dataclass(frozen=True)
class CosetMask:
    """Keep/discard pattern for one quincunx coset on an ``height x width`` grid."""

    height: int
    width: int
    parity: int
    kept: np.ndarray = field(repr=False, compare=False)

    def __eq__(self, other):
        if not isinstance(other, CosetMask):
            return NotImplemented
        return (self.height, self.width, self.parity) == (
            other.height,
            other.width,
            other.parity,
        )

    def __hash__(self):
        return hash((self.height, self.width, self.parity))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def complement(self) -> CosetMask:
        return coset_mask(self.height, self.width, 1 - self.parity)


def coset_mask(height: int, width: int, parity: int = 0) -> CosetMask:
    if height < 1 or width < 1:
        raise ValueError(f"mask dimensions must be positive, got {height}x{width}")
    if parity not in (0, 1):
        raise ValueError(f"parity must be 0 or 1, got {parity}")
    n1 = np.arange(height)[:, None]
    n2 = np.arange(width)[None, :]
    kept = (n1 + n2) % 2 == parity
    kept.setflags(write=False)
    return CosetMask(height, width, parity, kept)


def apply_mask(image, mask: CosetMask) -> np.ndarray:
    """Zero every sample off the mask's coset; returns a new array."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != mask.shape:
        raise ValueError(
            f"image shape {image.shape} does not match mask shape {mask.shape}"
        )
    return np.where(mask.kept, image, 0.0)
