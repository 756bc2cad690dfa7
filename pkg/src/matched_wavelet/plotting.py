"""Matplotlib figures written next to the CSV/PGM artifacts.

Everything renders through the Agg backend with fixed metadata, so repeated
runs produce byte-identical PNG files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .wavelet_render import frequency_grid  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "image.cmap": "viridis",
    "svg.hashsalt": "matched-wavelet",
}
PNG_METADATA = {"Software": None}


def _save(fig, path):
    fig.savefig(path, format="png", metadata=PNG_METADATA)
    plt.close(fig)


def training_curves(loss_history, psnr_history, path, target_psnr=None):
    with plt.rc_context(STYLE):
        fig, (ax_l, ax_p) = plt.subplots(1, 2, figsize=(8, 3))
        it = np.arange(len(loss_history))
        ax_l.semilogy(it, np.maximum(loss_history, np.finfo(float).tiny), lw=0.8)
        ax_l.set_xlabel("iteration")
        ax_l.set_ylabel("squared error")
        ax_p.plot(it, psnr_history, lw=0.8)
        if target_psnr is not None:
            ax_p.axhline(target_psnr, color="k", ls="--", lw=0.6)
        ax_p.set_xlabel("iteration")
        ax_p.set_ylabel("PSNR [dB]")
        fig.tight_layout()
        _save(fig, path)


def filter_taps(bank, path):
    """Four-panel heat map of the tap grids, anchors marked."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 4, figsize=(10, 2.8))
        lim = max(float(np.max(np.abs(f.taps))) for f in bank.filters()) or 1.0
        for ax, (name, f) in zip(axes, bank.items()):
            im = ax.imshow(f.taps, cmap="RdBu_r", vmin=-lim, vmax=lim)
            ax.plot(f.anchor[1], f.anchor[0], "k+", ms=8)
            for (r, c), v in np.ndenumerate(f.taps):
                ax.text(c, r, f"{v:.3f}", ha="center", va="center", fontsize=6)
            ax.set_title(name)
            ax.set_xticks([])
            ax.set_yticks([])
        fig.colorbar(im, ax=axes, shrink=0.8)
        _save(fig, path)


def frequency_responses(responses: dict, path):
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(responses), figsize=(2.6 * len(responses), 2.6))
        axes = np.atleast_1d(axes)
        for ax, (name, mag) in zip(axes, responses.items()):
            w = frequency_grid(mag.shape[0])
            step = w[1] - w[0]
            ext = (w[0], w[-1] + step, w[-1] + step, w[0])
            ax.imshow(mag, extent=ext, vmin=0.0)
            ax.set_title(f"|{name}|")
            ax.set_xlabel(r"$\omega_2$")
        axes[0].set_ylabel(r"$\omega_1$")
        fig.tight_layout()
        _save(fig, path)


def surface(surf, path, title=""):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 4))
        (x1a, x1b), (x2a, x2b) = surf.support
        lim = float(np.max(np.abs(surf.values))) or 1.0
        vmin = -lim if surf.values.min() < 0 else 0.0
        im = ax.imshow(surf.values, extent=(x2a, x2b, x1b, x1a), vmin=vmin, vmax=lim,
                       cmap="RdBu_r" if vmin < 0 else "viridis", interpolation="nearest")
        ax.set_title(title)
        ax.set_xlabel("$x_2$")
        ax.set_ylabel("$x_1$")
        fig.colorbar(im, ax=ax, shrink=0.8)
        _save(fig, path)
