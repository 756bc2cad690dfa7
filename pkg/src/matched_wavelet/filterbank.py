"""Two-channel quincunx filter bank: analysis, coset masking, synthesis.

All convolutions are circular (periodic) and true convolutions, not
cross-correlations::

    out[n] = sum_p taps[p] * image[(n - p + anchor) mod (H, W)]

so a filter tap at array position ``p`` acts at lattice offset ``p - anchor``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .lattice import CosetMask, apply_mask

FILTER_NAMES = ("h0", "h1", "f0", "f1")
PEAK = 255.0


def as_image(image) -> np.ndarray:
    """Validate and convert to a 2-D float64 sample grid."""
    arr = np.array(image, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image samples must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class Filter2D:
    taps: np.ndarray
    anchor: tuple[int, int] = (0, 0)

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.float64)
        if taps.ndim == 1:
            taps = taps[None, :]
        if taps.ndim != 2 or taps.size == 0:
            raise ValueError("filter taps must be a nonempty 2-D grid")
        if not np.all(np.isfinite(taps)):
            raise ValueError("filter taps must be finite")
        anchor = tuple(int(a) for a in self.anchor)
        if len(anchor) != 2 or not all(0 <= a < s for a, s in zip(anchor, taps.shape)):
            raise ValueError(f"anchor {self.anchor} outside filter of shape {taps.shape}")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "anchor", anchor)

    @property
    def shape(self) -> tuple[int, int]:
        return self.taps.shape

    def offsets(self):
        """Yield ``((dn1, dn2), tap)`` for every nonzero tap, in row-major order."""
        a0, a1 = self.anchor
        for (p0, p1), t in np.ndenumerate(self.taps):
            if t != 0.0:
                yield (p0 - a0, p1 - a1), t

    def with_taps(self, taps) -> Filter2D:
        return Filter2D(taps, self.anchor)

    def __eq__(self, other):
        if not isinstance(other, Filter2D):
            return NotImplemented
        return self.anchor == other.anchor and np.array_equal(self.taps, other.taps)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FilterBank:
    h0: Filter2D
    h1: Filter2D
    f0: Filter2D
    f1: Filter2D

    def __post_init__(self):
        shapes = {f.shape for f in self.filters()}
        if len(shapes) != 1:
            raise ValueError(f"all four filters must share one shape, got {sorted(shapes)}")

    def filters(self) -> tuple[Filter2D, Filter2D, Filter2D, Filter2D]:
        return (self.h0, self.h1, self.f0, self.f1)

    def items(self):
        return zip(FILTER_NAMES, self.filters())

    @property
    def shape(self) -> tuple[int, int]:
        return self.h0.shape

    def replace_taps(self, h0, h1, f0, f1) -> FilterBank:
        return FilterBank(
            self.h0.with_taps(h0),
            self.h1.with_taps(h1),
            self.f0.with_taps(f0),
            self.f1.with_taps(f1),
        )

    def __eq__(self, other):
        if not isinstance(other, FilterBank):
            return NotImplemented
        return all(a == b for a, b in zip(self.filters(), other.filters()))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    """Intermediates of one forward pass, kept for backpropagation."""

    y0: np.ndarray
    y1: np.ndarray
    z0: np.ndarray
    z1: np.ndarray
    recon: np.ndarray
    image: np.ndarray = field(repr=False)
    bank: FilterBank = field(repr=False)
    mask: CosetMask = field(repr=False)
    # shifted copies of the analysis/synthesis inputs, reused by the gradients
    _stacks: dict = field(default_factory=dict, repr=False)


def shift_stack(x: np.ndarray, shape: tuple[int, int], anchor: tuple[int, int], sign: int = 1) -> np.ndarray:
    """Row ``p`` (row-major over ``shape``) holds ``roll(x, sign * (p - anchor))`` flattened.

    With ``sign=+1``, ``taps.ravel() @ stack`` is ``conv2_circular(x, taps)``;
    with ``sign=-1`` it is the adjoint (circular correlation).
    """
    rows, cols = shape
    out = np.empty((rows * cols, x.size))
    i = 0
    for p0 in range(rows):
        for p1 in range(cols):
            shift = (sign * (p0 - anchor[0]), sign * (p1 - anchor[1]))
            out[i] = np.roll(x, shift, axis=(0, 1)).ravel()
            i += 1
    return out


def _check_fits(image: np.ndarray, filt: Filter2D):
    if filt.shape[0] > image.shape[0] or filt.shape[1] > image.shape[1]:
        raise ValueError(f"filter {filt.shape} larger than image {image.shape}")


def conv2_circular(image, filt: Filter2D) -> np.ndarray:
    image = as_image(image)
    _check_fits(image, filt)
    out = np.zeros_like(image)
    for shift, t in filt.offsets():
        out += t * np.roll(image, shift, axis=(0, 1))
    return out


def _conv_stacked(stack: np.ndarray, filt: Filter2D, shape) -> np.ndarray:
    return (filt.taps.ravel() @ stack).reshape(shape)


def analysis(image, bank: FilterBank, mask: CosetMask) -> tuple[np.ndarray, np.ndarray]:
    image = as_image(image)
    z0 = apply_mask(conv2_circular(image, bank.h0), mask)
    z1 = apply_mask(conv2_circular(image, bank.h1), mask)
    return z0, z1


def synthesis(z0, z1, bank: FilterBank) -> np.ndarray:
    z0, z1 = as_image(z0), as_image(z1)
    if z0.shape != z1.shape:
        raise ValueError(f"channel shapes differ: {z0.shape} vs {z1.shape}")
    return conv2_circular(z0, bank.f0) + conv2_circular(z1, bank.f1)


def forward(image, bank: FilterBank, mask: CosetMask) -> ForwardTrace:
    """Run the full analysis -> mask -> synthesis -> sum path."""
    image = as_image(image)
    if image.shape != mask.shape:
        raise ValueError(f"image shape {image.shape} does not match mask {mask.shape}")
    _check_fits(image, bank.h0)
    shape = image.shape
    a_stack = shift_stack(image, bank.shape, bank.h0.anchor)
    if bank.h1.anchor == bank.h0.anchor:
        a_stack1 = a_stack
    else:
        a_stack1 = shift_stack(image, bank.shape, bank.h1.anchor)
    y0 = _conv_stacked(a_stack, bank.h0, shape)
    y1 = _conv_stacked(a_stack1, bank.h1, shape)
    z0 = apply_mask(y0, mask)
    z1 = apply_mask(y1, mask)
    z0_stack = shift_stack(z0, bank.shape, bank.f0.anchor)
    z1_stack = shift_stack(z1, bank.shape, bank.f1.anchor)
    recon = _conv_stacked(z0_stack, bank.f0, shape) + _conv_stacked(z1_stack, bank.f1, shape)
    stacks = {"a0": a_stack, "a1": a_stack1, "z0": z0_stack, "z1": z1_stack}
    return ForwardTrace(y0, y1, z0, z1, recon, image, bank, mask, stacks)


def psnr(reference, test, peak: float = PEAK) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are identical."""
    reference, test = as_image(reference), as_image(test)
    if reference.shape != test.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {test.shape}")
    mse = np.mean((reference - test) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak**2 / mse)


class PRReport(NamedTuple):
    max_abs_error: float
    psnr: float


def pr_error(bank: FilterBank, mask: CosetMask, probes) -> list[PRReport]:
    """Reconstruction error of ``bank`` on each probe image."""
    probes = list(probes)
    if not probes:
        raise ValueError("at least one probe image is required")
    reports = []
    for probe in probes:
        probe = as_image(probe)
        recon = forward(probe, bank, mask).recon
        reports.append(PRReport(float(np.max(np.abs(recon - probe))), psnr(probe, recon)))
    return reports


def quincunx_haar_bank() -> FilterBank:
    """Reference perfect-reconstruction bank for the shared parity-0 coset.

    Analysis taps sit at offsets (0,0),(0,1); synthesis taps at (0,-1),(0,0),
    which cancels the one-sample delay of the analysis stage.
    """
    s = 1.0 / math.sqrt(2.0)
    return FilterBank(
        h0=Filter2D([[s, s]], (0, 0)),
        h1=Filter2D([[s, -s]], (0, 0)),
        f0=Filter2D([[s, s]], (0, 1)),
        f1=Filter2D([[-s, s]], (0, 1)),
    )


def zero_bank(shape=(1, 2)) -> FilterBank:
    z = np.zeros(shape)
    return FilterBank(*(Filter2D(z) for _ in range(4)))
