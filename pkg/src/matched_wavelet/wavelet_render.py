"""Cascade approximation of scaling/wavelet functions and filter frequency responses.

The cascade iterate after ``j`` steps is held exactly as a coefficient array
``c_j`` with

    Phi_j(x) = sum_k c_j[k] * 1[0,1)^2 (M^j x - k),
    c_{j+1}[m] = sum_n sqrt(2) f0(n) c_j[m - M^j n],   c_0 = delta.

Because ``M @ M = 2 I`` the cells of ``Phi_j`` are squares of side
``2**(-j/2)`` for even ``j`` and rotated parallelograms for odd ``j``; point
sampling on the dyadic grid of density ``2**ceil(j/2)`` is exact in both
cases, so the grid quadrature equals the exact integral ``sum(c_j) / 2**j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .filterbank import Filter2D
from .lattice import DecimationMatrix

DEFAULT_MAX_SAMPLES = 256


@dataclass(frozen=True, eq=False)
class SampledSurface:
    """A function sampled at ``origin + (i1, i2) / density``."""

    values: np.ndarray
    origin: tuple[float, float]
    density: float
    level: int
    integral: float
    coefficients: np.ndarray = field(repr=False)
    coefficient_offset: tuple[int, int] = (0, 0)
    exact: bool = True

    @property
    def spacing(self) -> float:
        return 1.0 / self.density

    @property
    def support(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """``((x1_min, x1_max), (x2_min, x2_max))`` of the sampled box."""
        h = self.spacing
        rows, cols = self.values.shape
        return (
            (self.origin[0], self.origin[0] + rows * h),
            (self.origin[1], self.origin[1] + cols * h),
        )

    def quadrature(self) -> float:
        return float(self.values.sum()) * self.spacing**2


def _require_quincunx(m: DecimationMatrix):
    if abs(m.determinant) != 2:
        raise ValueError("cascade rendering needs a |det| == 2 decimation matrix")


def _tap_offsets(filt: Filter2D):
    a0, a1 = filt.anchor
    for (p0, p1), t in np.ndenumerate(filt.taps):
        if t != 0.0:
            yield np.array([p0 - a0, p1 - a1], dtype=np.int64), t


def _refine(coeffs, offset, filt: Filter2D, mj: np.ndarray):
    """One two-scale step: ``out[m] = sum_n sqrt(2) f(n) coeffs[m - M^j n]``."""
    taps = list(_tap_offsets(filt))
    if not taps:
        return np.zeros((1, 1)), (0, 0)
    shifts = [mj @ n for n, _ in taps]
    lo = np.min(shifts, axis=0) + np.asarray(offset)
    hi = np.max(shifts, axis=0) + np.asarray(offset) + np.array(coeffs.shape)
    out = np.zeros(tuple(hi - lo))
    r, c = coeffs.shape
    for (n, t), s in zip(taps, shifts):
        start = s + np.asarray(offset) - lo
        out[start[0] : start[0] + r, start[1] : start[1] + c] += math.sqrt(2.0) * t * coeffs
    return out, tuple(int(v) for v in lo)


def _sample(coeffs, offset, level, m: DecimationMatrix, density, max_samples=None):
    """Point-sample ``sum_k c[k] 1(M^level x - k)`` on a dyadic grid."""
    mj = m.power(level).astype(np.float64)
    inv = np.linalg.inv(mj)
    k0 = np.asarray(offset, dtype=np.float64)
    k1 = k0 + np.array(coeffs.shape, dtype=np.float64)
    corners = np.array([[k0[0], k0[1]], [k0[0], k1[1]], [k1[0], k0[1]], [k1[0], k1[1]]])
    xs = corners @ inv.T
    exact = True
    if max_samples is not None:
        extent = float(np.max(xs.max(axis=0) - xs.min(axis=0)))
        while density > 1 and extent * density + 2 > max_samples:
            density //= 2
            exact = False
    h = 1.0 / density
    lo = np.floor(xs.min(axis=0) * density) * h
    hi = np.ceil(xs.max(axis=0) * density) * h
    n1 = int(round((hi[0] - lo[0]) * density))
    n2 = int(round((hi[1] - lo[1]) * density))
    x1 = lo[0] + np.arange(n1) * h
    x2 = lo[1] + np.arange(n2) * h
    g1, g2 = np.meshgrid(x1, x2, indexing="ij")
    y1 = mj[0, 0] * g1 + mj[0, 1] * g2
    y2 = mj[1, 0] * g1 + mj[1, 1] * g2
    i1 = np.floor(y1).astype(np.int64) - int(offset[0])
    i2 = np.floor(y2).astype(np.int64) - int(offset[1])
    inside = (i1 >= 0) & (i1 < coeffs.shape[0]) & (i2 >= 0) & (i2 < coeffs.shape[1])
    values = np.zeros((n1, n2))
    values[inside] = coeffs[i1[inside], i2[inside]]
    return values, (float(lo[0]), float(lo[1])), density, exact


def level_density(level: int) -> int:
    """Dyadic density at which a level-``level`` iterate is sampled exactly."""
    return 2 ** ((level + 1) // 2)


def _surface(coeffs, offset, level, m, max_samples) -> SampledSurface:
    values, origin, density, exact = _sample(
        coeffs, offset, level, m, level_density(level), max_samples
    )
    return SampledSurface(
        values=values,
        origin=origin,
        density=density,
        level=level,
        integral=float(coeffs.sum()) / 2.0**level,
        coefficients=coeffs,
        coefficient_offset=offset,
        exact=exact,
    )


def cascade_iterates(f0: Filter2D, m: DecimationMatrix, iterations: int,
                     max_samples: int | None = DEFAULT_MAX_SAMPLES) -> list[SampledSurface]:
    """Every cascade iterate ``Phi_0 .. Phi_iterations``."""
    _require_quincunx(m)
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    coeffs, offset = np.ones((1, 1)), (0, 0)
    out = [_surface(coeffs, offset, 0, m, max_samples)]
    for j in range(iterations):
        coeffs, offset = _refine(coeffs, offset, f0, m.power(j))
        out.append(_surface(coeffs, offset, j + 1, m, max_samples))
    return out


def cascade_scaling(f0: Filter2D, m: DecimationMatrix, iterations: int,
                    max_samples: int | None = DEFAULT_MAX_SAMPLES) -> SampledSurface:
    return cascade_iterates(f0, m, iterations, max_samples)[-1]


def cascade_wavelet(f1: Filter2D, scaling: SampledSurface, m: DecimationMatrix,
                    max_samples: int | None = DEFAULT_MAX_SAMPLES) -> SampledSurface:
    """``Psi(x) = sum_n sqrt(2) f1(n) Phi(Mx - n)`` against a cascade iterate."""
    _require_quincunx(m)
    if scaling.exact and scaling.density != level_density(scaling.level):
        raise ValueError(
            f"surface density {scaling.density} does not match level {scaling.level}"
        )
    coeffs, offset = _refine(
        scaling.coefficients, scaling.coefficient_offset, f1, m.power(scaling.level)
    )
    return _surface(coeffs, offset, scaling.level + 1, m, max_samples)


def cascade_residuals(f0: Filter2D, m: DecimationMatrix, iterations: int) -> list[float]:
    """L2 norm of ``Phi_j - T Phi_j`` (``T`` the two-scale operator) per iterate.

    ``T Phi_j`` is ``Phi_{j+1}``; both are compared exactly on the grid of the
    finer iterate.
    """
    _require_quincunx(m)
    coeffs, offset = np.ones((1, 1)), (0, 0)
    residuals = []
    for j in range(iterations):
        nxt, nxt_offset = _refine(coeffs, offset, f0, m.power(j))
        density = level_density(j + 1)
        a = _sample(coeffs, offset, j, m, density)
        b = _sample(nxt, nxt_offset, j + 1, m, density)
        residuals.append(_l2_difference(a, b, density))
        coeffs, offset = nxt, nxt_offset
    return residuals


def _l2_difference(a, b, density) -> float:
    (va, oa, _, _), (vb, ob, _, _) = a, b
    lo = np.minimum(oa, ob)
    ia = np.rint((np.asarray(oa) - lo) * density).astype(int)
    ib = np.rint((np.asarray(ob) - lo) * density).astype(int)
    shape = np.maximum(ia + va.shape, ib + vb.shape)
    diff = np.zeros(shape)
    diff[ia[0] : ia[0] + va.shape[0], ia[1] : ia[1] + va.shape[1]] += va
    diff[ib[0] : ib[0] + vb.shape[0], ib[1] : ib[1] + vb.shape[1]] -= vb
    return math.sqrt(float(np.sum(diff**2))) / density


def frequency_grid(grid_size: int) -> np.ndarray:
    """Uniform frequencies ``2 pi (k - N//2) / N`` covering ``[-pi, pi)``; DC at index ``N//2``."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    return 2.0 * np.pi * (np.arange(grid_size) - grid_size // 2) / grid_size


def freq_response(filt: Filter2D, grid_size: int = 64) -> np.ndarray:
    """``|sum_n taps[n] exp(-i w.n)|`` on ``frequency_grid(grid_size)`` squared."""
    w = frequency_grid(grid_size)
    rows, cols = filt.shape
    n1 = np.arange(rows) - filt.anchor[0]
    n2 = np.arange(cols) - filt.anchor[1]
    e1 = np.exp(-1j * np.outer(w, n1))
    e2 = np.exp(-1j * np.outer(n2, w))
    return np.abs(e1 @ filt.taps @ e2)
