"""Command-line entry point: ``matched-wavelet {train,gradcheck,prcheck,render}``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import io, plotting
from .filterbank import Filter2D, FilterBank, forward, pr_error, quincunx_haar_bank
from .lattice import coset_mask, quincunx_matrix
from .training import TrainConfig, finite_diff_grad, gradients, train
from .wavelet_render import cascade_iterates, cascade_residuals, cascade_wavelet, freq_response

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DIVERGENCE = 4
EXIT_CHECK_FAILED = 5

GRADCHECK_TOLERANCE = 1e-6


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _echo_config(command: str, config: dict):
    print(f"# {command} " + json.dumps(config, sort_keys=True), flush=True)


def _add_train_flags(p):
    defaults = TrainConfig()
    p.add_argument("image", type=Path, help="uncompressed 8- or 24-bit BMP")
    p.add_argument("-o", "--output-dir", type=Path, default=Path("train_out"))
    p.add_argument("--learning-rate", type=float, default=defaults.learning_rate,
                   help="base step size, tied to a 512x512 image (default %(default)g)")
    p.add_argument("--momentum", type=float, default=defaults.momentum)
    p.add_argument("--max-iterations", type=int, default=defaults.max_iterations)
    p.add_argument("--target-psnr", type=float, default=defaults.target_psnr)
    p.add_argument("--filter-size", type=int, default=defaults.filter_size)
    p.add_argument("--init-size", type=int, default=defaults.init_size,
                   help="side of the lowpass/highpass starting kernels")
    p.add_argument("--loss-floor", type=float, default=defaults.loss_floor)
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument("--mask-parity", type=int, choices=(0, 1), default=defaults.mask_parity)
    p.add_argument("--no-auto-scale", dest="auto_scale_lr", action="store_false",
                   help="do not rescale the step size by 512*512/(H*W)")
    p.add_argument("--intensity-scale", type=float, default=defaults.intensity_scale)
    p.add_argument("--divergence-factor", type=float, default=defaults.divergence_factor)
    p.add_argument("--crop", type=int, nargs=3, metavar=("ROW", "COL", "SIZE"),
                   help="train on a SIZE x SIZE crop starting at (ROW, COL)")
    p.add_argument("--progress-every", type=int, default=1000)
    p.add_argument("--no-figures", dest="figures", action="store_false")


def cmd_train(args) -> int:
    config = TrainConfig(**{f.name: getattr(args, f.name) for f in fields(TrainConfig)})
    try:
        image = io.read_bmp(args.image)
    except (OSError, io.BMPError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.crop:
        r, c, n = args.crop
        if r < 0 or c < 0 or r + n > image.shape[0] or c + n > image.shape[1]:
            print(f"error: crop {args.crop} outside image {image.shape}", file=sys.stderr)
            return EXIT_USAGE
        image = image[r : r + n, c : c + n]
    if image.shape[0] % 2 or image.shape[1] % 2:
        print(f"error: image dimensions must be even, got {image.shape}", file=sys.stderr)
        return EXIT_USAGE

    _echo_config("train", {**config.to_dict(), "image": str(args.image),
                           "crop": args.crop, "shape": list(image.shape),
                           "effective_learning_rate": config.effective_learning_rate(image.shape)})

    def progress(state):
        print(f"iteration {state.iteration}: loss {state.loss_history[-1]:.6g} "
              f"PSNR {state.psnr_history[-1]:.3f} dB", file=sys.stderr, flush=True)

    result = train(image, config, progress=progress, progress_every=max(args.progress_every, 1))

    out = args.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
        io.write_csv_rows(result.trace_rows(), out / "trace.csv", header=("iteration", "loss", "psnr"))
        if result.stop_reason != "divergence":
            metadata = {
                "source_image": args.image.name,
                "crop": args.crop,
                "config": config.to_dict(),
                "final_psnr": _json_float(result.final_psnr),
                "final_loss": result.final_loss,
                "iterations": result.iterations,
                "stop_reason": result.stop_reason,
            }
            io.export_filters(result.bank, out / "filters.txt", metadata)
            recon = forward(image, result.bank, coset_mask(*image.shape, config.mask_parity)).recon
            io.write_pgm(recon, out / "recon.pgm")
            if args.figures:
                plotting.training_curves(result.loss_history, result.psnr_history,
                                         out / "training.png", config.target_psnr)
                plotting.filter_taps(result.bank, out / "filters.png")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    print(f"final_loss={result.final_loss:.17g} final_psnr={result.final_psnr:.6f} "
          f"iterations={result.iterations} stop_reason={result.stop_reason}")
    return EXIT_DIVERGENCE if result.stop_reason == "divergence" else EXIT_OK


def _json_float(x: float):
    return x if math.isfinite(x) else str(x)


def cmd_gradcheck(args) -> int:
    _echo_config("gradcheck", {k: v for k, v in vars(args).items() if k != "func"})
    rng = np.random.default_rng(args.seed)
    mask = coset_mask(args.image_size, args.image_size, 0)
    worst = 0.0
    for _ in range(args.instances):
        image = rng.uniform(0.0, 1.0, (args.image_size, args.image_size))
        k = args.filter_size
        anchor = (k // 2, k // 2)
        bank = FilterBank(*(Filter2D(rng.normal(0.0, 0.5, (k, k)), anchor) for _ in range(4)))
        analytic = gradients(image, bank, mask, forward(image, bank, mask))
        numeric = finite_diff_grad(image, bank, mask, args.eps)
        for a, n in zip(analytic.grids(), numeric.grids()):
            if args.corrupt:
                a = a.copy()
                a.flat[0] += 1e-3 * (abs(a.flat[0]) + 1.0)
            rel = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-12)
            worst = max(worst, float(rel.max()))
    ok = worst < GRADCHECK_TOLERANCE
    print(f"max_relative_error={worst:.6e} tolerance={GRADCHECK_TOLERANCE:g} "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _load_bank(path):
    try:
        return io.load_filters(path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except io.FilterFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
    return None


def cmd_prcheck(args) -> int:
    _echo_config("prcheck", {k: str(v) if isinstance(v, Path) else v
                             for k, v in vars(args).items() if k != "func"})
    bank = _load_bank(args.filters)
    if bank is None:
        return EXIT_IO
    n = args.probe_size
    probes = {}
    impulse = np.zeros((n, n))
    impulse[n // 2, n // 2] = 255.0
    probes["impulse"] = impulse
    rng = np.random.default_rng(args.seed)
    for i in range(args.probes):
        probes[f"random{i}"] = rng.uniform(0.0, 255.0, (n, n))
    if args.image is not None:
        try:
            img = io.read_bmp(args.image)
        except (OSError, io.BMPError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        probes[args.image.name] = img
    ok = True
    for name, probe in probes.items():
        if probe.shape[0] < bank.shape[0] or probe.shape[1] < bank.shape[1]:
            print(f"error: probe {name} smaller than the filters", file=sys.stderr)
            return EXIT_USAGE
        (report,) = pr_error(bank, coset_mask(*probe.shape, args.mask_parity), [probe])
        passed = report.psnr >= args.threshold
        ok &= passed
        print(f"{name}: max_abs_error={report.max_abs_error:.6e} psnr={report.psnr:.6f} "
              f"{'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_render(args) -> int:
    _echo_config("render", {k: str(v) if isinstance(v, Path) else v
                            for k, v in vars(args).items() if k != "func"})
    bank = _load_bank(args.filters)
    if bank is None:
        return EXIT_IO
    out = args.output_dir
    m = quincunx_matrix()
    try:
        out.mkdir(parents=True, exist_ok=True)
        responses = {}
        for name, filt in bank.items():
            mag = freq_response(filt, args.grid_size)
            responses[name] = mag
            io.write_csv_grid(mag, out / f"freq_{name}.csv")
            io.write_pgm(mag, out / f"freq_{name}.pgm", normalize=True)

        pairs = [("", bank.f0, bank.f1)]
        if args.dual:
            pairs.append(("dual_", bank.h0, bank.h1))
        for prefix, lo, hi in pairs:
            iterates = cascade_iterates(lo, m, args.iterations, args.max_samples)
            phi = iterates[-1]
            psi = cascade_wavelet(hi, phi, m, args.max_samples)
            residuals = cascade_residuals(lo, m, args.iterations)
            for tag, surf in (("scaling", phi), ("wavelet", psi)):
                io.write_csv_grid(surf.values, out / f"{prefix}{tag}.csv")
                io.write_pgm(surf.values, out / f"{prefix}{tag}.pgm", normalize=True)
                if args.figures:
                    plotting.surface(surf, out / f"{prefix}{tag}.png",
                                     f"{prefix}{tag}, level {surf.level}")
            print(f"{prefix}scaling: level={phi.level} integral={phi.integral:.12g} "
                  f"residual={residuals[-1]:.6e} exact_sampling={phi.exact}")
            print(f"{prefix}wavelet: level={psi.level} integral={psi.integral:.12g}")
        if args.figures:
            plotting.frequency_responses(responses, out / "freq_response.png")
            plotting.filter_taps(bank, out / "filters.png")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_haar(args) -> int:
    io.export_filters(quincunx_haar_bank(), args.path, {"source": "quincunx-haar"})
    print(args.path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="matched-wavelet",
                     description="Learn image-matched two-channel quincunx wavelets.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="learn a filter bank matched to an image")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    p.add_argument("--image-size", type=int, default=8)
    p.add_argument("--filter-size", type=int, default=3)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("prcheck", help="measure reconstruction quality of a filter file")
    p.add_argument("filters", type=Path)
    p.add_argument("--probes", type=int, default=4, help="number of random probes")
    p.add_argument("--probe-size", type=int, default=16)
    p.add_argument("--image", type=Path, help="extra BMP probe")
    p.add_argument("--threshold", type=float, default=70.0, help="minimum PSNR in dB")
    p.add_argument("--mask-parity", type=int, choices=(0, 1), default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_prcheck)

    p = sub.add_parser("render", help="write frequency responses and cascade surfaces")
    p.add_argument("filters", type=Path)
    p.add_argument("output_dir", type=Path)
    p.add_argument("--iterations", type=int, default=8)
    p.add_argument("--grid-size", type=int, default=64)
    p.add_argument("--max-samples", type=int, default=256)
    p.add_argument("--dual", action="store_true", help="also render the analysis-side pair")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("haar", help="write the reference quincunx-Haar filter file")
    p.add_argument("path", type=Path)
    p.set_defaults(func=cmd_haar)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
