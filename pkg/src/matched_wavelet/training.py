"""Filter learning by full-batch gradient descent with Nesterov momentum.

The loss is the total squared reconstruction error ``sum_n (a[n] - recon[n])**2``.
Training runs on intensities rescaled by ``TrainConfig.intensity_scale``
(default ``1/255``), so reported losses are in those units while PSNR is
scale-free.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .filterbank import (
    FILTER_NAMES,
    Filter2D,
    FilterBank,
    ForwardTrace,
    as_image,
    forward,
    shift_stack,
)
from .lattice import CosetMask, coset_mask

logger = logging.getLogger(__name__)

REFERENCE_PIXELS = 512 * 512
STOP_REASONS = ("target-psnr", "loss-floor", "max-iterations", "divergence")


class DivergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-7
    momentum: float = 0.9
    max_iterations: int = 15000
    target_psnr: float = 70.0
    filter_size: int = 4
    init_size: int = 2
    loss_floor: float = 1e-6
    seed: int = 0
    mask_parity: int = 0
    auto_scale_lr: bool = True
    intensity_scale: float = 1.0 / 255.0
    divergence_factor: float = 1e3

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.target_psnr > 0:
            raise ValueError("target_psnr must be positive")
        if self.filter_size < 2:
            raise ValueError("filter_size must be at least 2")
        if not 1 <= self.init_size <= self.filter_size:
            raise ValueError("init_size must lie in [1, filter_size]")
        if self.mask_parity not in (0, 1):
            raise ValueError("mask_parity must be 0 or 1")
        if not self.intensity_scale > 0:
            raise ValueError("intensity_scale must be positive")

    def effective_learning_rate(self, shape) -> float:
        """Step size after the pixel-count rule ``lr * 512*512 / (H*W)``."""
        if not self.auto_scale_lr:
            return self.learning_rate
        return self.learning_rate * REFERENCE_PIXELS / (shape[0] * shape[1])

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Gradients:
    g_h0: np.ndarray
    g_h1: np.ndarray
    g_f0: np.ndarray
    g_f1: np.ndarray

    def grids(self) -> tuple[np.ndarray, ...]:
        return (self.g_h0, self.g_h1, self.g_f0, self.g_f1)

    def items(self):
        return zip(FILTER_NAMES, self.grids())

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(g))) for g in self.grids())


@dataclass(eq=False)
class TrainState:
    """Optimizer state; owned by a single training loop."""

    bank: FilterBank
    velocity: tuple[np.ndarray, ...]
    iteration: int = 0
    loss_history: list[float] = field(default_factory=list)
    psnr_history: list[float] = field(default_factory=list)

    @classmethod
    def start(cls, bank: FilterBank) -> TrainState:
        return cls(bank, tuple(np.zeros(f.shape) for f in bank.filters()))

    def record(self, loss_value: float, psnr_value: float) -> TrainState:
        self.loss_history.append(loss_value)
        self.psnr_history.append(psnr_value)
        return self


@dataclass(frozen=True, eq=False)
class TrainResult:
    bank: FilterBank
    final_loss: float
    final_psnr: float
    iterations: int
    stop_reason: str
    loss_history: np.ndarray = field(repr=False)
    psnr_history: np.ndarray = field(repr=False)
    effective_learning_rate: float = float("nan")

    def trace_rows(self):
        """``(iteration, loss, psnr)`` rows, one per optimizer step."""
        return [
            (i, float(l), float(p))
            for i, (l, p) in enumerate(zip(self.loss_history, self.psnr_history))
        ]


def _check_pair(image, recon):
    image, recon = as_image(image), as_image(recon)
    if image.shape != recon.shape:
        raise ValueError(f"shape mismatch: {image.shape} vs {recon.shape}")
    return image, recon


def loss(image, recon) -> float:
    image, recon = _check_pair(image, recon)
    err = (image - recon).ravel()
    return float(err @ err)


def psnr_from_loss(loss_value: float, n_samples: int, peak: float = 1.0) -> float:
    mse = loss_value / n_samples
    if mse == 0.0:
        return math.inf
    if not math.isfinite(mse):
        return -math.inf
    return 10.0 * math.log10(peak**2 / mse)


def gradients(image, bank: FilterBank, mask: CosetMask, trace: ForwardTrace) -> Gradients:
    """Exact gradient of the squared-error loss with respect to every filter tap.

    With residual ``r = -2 (a - recon)``:

    * ``g_fk[p] = sum_n r[n] z_k[n - p + anchor]``
    * the back-signal into channel k is ``r`` correlated with ``f_k``, then masked
    * ``g_hk[p] = sum_n back_k[n] a[n - p + anchor]``
    """
    image = as_image(image)
    if (
        trace.mask != mask
        or trace.bank is not bank and trace.bank != bank
        or trace.image is not image and not np.array_equal(trace.image, image)
    ):
        raise ValueError("trace was not produced by forward() on these inputs")

    shape = image.shape
    stacks = trace._stacks or {}
    r = -2.0 * (image - trace.recon)

    def stack(key, x, filt):
        s = stacks.get(key)
        if s is None:
            s = shift_stack(x, bank.shape, filt.anchor)
        return s

    z0_stack = stack("z0", trace.z0, bank.f0)
    z1_stack = stack("z1", trace.z1, bank.f1)
    g_f0 = (z0_stack @ r.ravel()).reshape(bank.shape)
    g_f1 = (z1_stack @ r.ravel()).reshape(bank.shape)

    r0 = shift_stack(r, bank.shape, bank.f0.anchor, sign=-1)
    r1 = r0 if bank.f1.anchor == bank.f0.anchor else shift_stack(r, bank.shape, bank.f1.anchor, sign=-1)
    back0 = np.where(mask.kept, (bank.f0.taps.ravel() @ r0).reshape(shape), 0.0)
    back1 = np.where(mask.kept, (bank.f1.taps.ravel() @ r1).reshape(shape), 0.0)

    a0_stack = stack("a0", image, bank.h0)
    a1_stack = stack("a1", image, bank.h1)
    g_h0 = (a0_stack @ back0.ravel()).reshape(bank.shape)
    g_h1 = (a1_stack @ back1.ravel()).reshape(bank.shape)
    grads = Gradients(g_h0, g_h1, g_f0, g_f1)
    if not all(np.all(np.isfinite(g)) for g in grads.grids()):
        raise DivergenceError("non-finite gradient")
    return grads


def finite_diff_grad(image, bank: FilterBank, mask: CosetMask, eps: float = 1e-5) -> Gradients:
    """Central-difference gradient, re-running the forward pass per tap."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    image = as_image(image)
    taps = [f.taps.copy() for f in bank.filters()]
    out = []
    for k in range(4):
        g = np.zeros_like(taps[k])
        for idx in np.ndindex(*g.shape):
            vals = []
            for delta in (eps, -eps):
                trial = [t.copy() for t in taps]
                trial[k][idx] += delta
                recon = forward(image, bank.replace_taps(*trial), mask).recon
                vals.append(loss(image, recon))
            g[idx] = (vals[0] - vals[1]) / (2.0 * eps)
        out.append(g)
    return Gradients(*out)


def default_anchors(size: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Analysis and synthesis anchors for a ``size x size`` bank.

    The synthesis anchor mirrors the analysis one so the cascaded
    analysis-synthesis response is centred on the zero-delay tap.
    """
    a = (size - 1) // 2
    s = size // 2
    return (a, a), (s, s)


def init_filters(config: TrainConfig) -> FilterBank:
    """Deterministic lowpass/highpass start.

    An ``init_size`` square kernel is placed at each filter's origin and
    zero-padded to ``filter_size``: constant taps summing to sqrt(2) for the
    lowpass pair, column-alternating signs with ``sum |taps| = sqrt(2)`` for
    the highpass pair.
    """
    k, s = config.filter_size, config.init_size
    if k < 2 or not 1 <= s <= k:
        raise ValueError(f"degenerate filter size {k} / init size {s}")
    lowpass = np.full((s, s), math.sqrt(2.0) / (s * s))
    signs = np.where(np.arange(s) % 2 == 0, 1.0, -1.0)
    highpass = np.tile(signs, (s, 1)) * math.sqrt(2.0) / (s * s)

    def place(kernel, anchor):
        taps = np.zeros((k, k))
        r0 = min(anchor[0], k - s)
        c0 = min(anchor[1], k - s)
        taps[r0 : r0 + s, c0 : c0 + s] = kernel
        return Filter2D(taps, anchor)

    ana, syn = default_anchors(k)
    return FilterBank(
        h0=place(lowpass, ana),
        h1=place(highpass, ana),
        f0=place(lowpass, syn),
        f1=place(highpass, syn),
    )


def sgd_nesterov_step(state: TrainState, grads: Gradients, config: TrainConfig,
                      learning_rate: Optional[float] = None) -> TrainState:
    """One Nesterov update per coefficient::

        v <- mu * v - lr * g
        theta <- theta + mu * v - lr * g
    """
    lr = config.learning_rate if learning_rate is None else learning_rate
    mu = config.momentum
    filters = state.bank.filters()
    if any(g.shape != f.shape for g, f in zip(grads.grids(), filters)):
        raise ValueError("gradient shapes do not match the filter bank")
    if not all(np.all(np.isfinite(g)) for g in grads.grids()):
        raise DivergenceError("non-finite gradient")
    new_taps, new_vel = [], []
    for f, v, g in zip(filters, state.velocity, grads.grids()):
        v = mu * v - lr * g
        new_taps.append(f.taps + mu * v - lr * g)
        new_vel.append(v)
    if not all(np.all(np.isfinite(v)) for v in new_vel):
        raise DivergenceError("non-finite velocity")
    return replace(
        state,
        bank=state.bank.replace_taps(*new_taps),
        velocity=tuple(new_vel),
        iteration=state.iteration + 1,
    )


def train(image, config: TrainConfig = TrainConfig(), bank: Optional[FilterBank] = None,
          progress: Optional[Callable[[TrainState], None]] = None,
          progress_every: int = 1000) -> TrainResult:
    """Learn an image-matched filter bank.

    Each iteration evaluates the current bank, records loss and PSNR, checks
    the stopping rules and, if none fired, takes one optimizer step.  The
    histories therefore hold one entry per step taken; ``final_loss`` and
    ``final_psnr`` always describe the returned bank.

    ``bank`` overrides the default initialization.
    """
    image = as_image(image)
    if image.shape[0] % 2 or image.shape[1] % 2:
        raise ValueError(f"image dimensions must be even, got {image.shape}")
    a = image * config.intensity_scale
    n = a.size
    mask = coset_mask(*a.shape, config.mask_parity)
    lr = config.effective_learning_rate(a.shape)
    state = TrainState.start(bank if bank is not None else init_filters(config))
    initial_loss = None
    stop_reason = "max-iterations"

    while True:
        trace = forward(a, state.bank, mask)
        current = loss(a, trace.recon)
        current_psnr = psnr_from_loss(current, n)
        if initial_loss is None:
            initial_loss = current
        if not math.isfinite(current) or current > config.divergence_factor * initial_loss:
            stop_reason = "divergence"
            break
        if current_psnr >= config.target_psnr:
            stop_reason = "target-psnr"
            break
        if current <= config.loss_floor:
            stop_reason = "loss-floor"
            break
        if state.iteration >= config.max_iterations:
            break
        try:
            grads = gradients(a, state.bank, mask, trace)
            stepped = sgd_nesterov_step(state, grads, config, lr)
        except DivergenceError:
            stop_reason = "divergence"
            break
        state = stepped.record(current, current_psnr)
        if progress is not None and state.iteration % progress_every == 0:
            progress(state)

    logger.info("stopped after %d iterations: %s (loss %.6g, PSNR %.3f dB)",
                state.iteration, stop_reason, current, current_psnr)
    return TrainResult(
        bank=state.bank,
        final_loss=current,
        final_psnr=current_psnr,
        iterations=state.iteration,
        stop_reason=stop_reason,
        loss_history=np.array(state.loss_history),
        psnr_history=np.array(state.psnr_history),
        effective_learning_rate=lr,
    )
