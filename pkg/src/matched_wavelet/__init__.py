"""Image-matched two-channel nonseparable wavelets on the quincunx lattice."""

from .filterbank import (
    Filter2D,
    FilterBank,
    ForwardTrace,
    PRReport,
    analysis,
    conv2_circular,
    forward,
    pr_error,
    psnr,
    quincunx_haar_bank,
    synthesis,
)
from .lattice import CosetMask, DecimationMatrix, apply_mask, coset_mask, quincunx_matrix
from .training import (
    DivergenceError,
    Gradients,
    TrainConfig,
    TrainResult,
    TrainState,
    finite_diff_grad,
    gradients,
    init_filters,
    loss,
    sgd_nesterov_step,
    train,
)
from .wavelet_render import (
    SampledSurface,
    cascade_iterates,
    cascade_residuals,
    cascade_scaling,
    cascade_wavelet,
    freq_response,
)

__version__ = "0.1.0"

__all__ = [
    "CosetMask",
    "DecimationMatrix",
    "DivergenceError",
    "Filter2D",
    "FilterBank",
    "ForwardTrace",
    "Gradients",
    "PRReport",
    "SampledSurface",
    "TrainConfig",
    "TrainResult",
    "TrainState",
    "analysis",
    "apply_mask",
    "cascade_iterates",
    "cascade_residuals",
    "cascade_scaling",
    "cascade_wavelet",
    "conv2_circular",
    "coset_mask",
    "finite_diff_grad",
    "forward",
    "freq_response",
    "gradients",
    "init_filters",
    "loss",
    "pr_error",
    "psnr",
    "quincunx_haar_bank",
    "quincunx_matrix",
    "sgd_nesterov_step",
    "synthesis",
    "train",
]
