"""BMP ingestion, PGM/CSV emission and the filter-bank text format."""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .filterbank import FILTER_NAMES, Filter2D, FilterBank, as_image

FILTER_FILE_MAGIC = "matched-wavelet-filterbank"
FILTER_FILE_VERSION = 1


class BMPError(ValueError):
    pass


class CompressedBMPError(BMPError):
    pass


class UnsupportedBitDepthError(BMPError):
    pass


class TruncatedBMPError(BMPError):
    pass


class FilterFileError(ValueError):
    pass


class FilterVersionError(FilterFileError):
    pass


class MalformedBlockError(FilterFileError):
    pass


class FilterShapeError(FilterFileError):
    pass


# ---------------------------------------------------------------------------
# BMP


def _luminance(r, g, b):
    # integer weights keep pure greys and the documented examples exact
    return (299 * np.asarray(r, np.int64) + 587 * np.asarray(g, np.int64)
            + 114 * np.asarray(b, np.int64)) / 1000.0


def read_bmp(path) -> np.ndarray:
    """Read an uncompressed 8-bit or 24-bit BMP as a top-down float64 grid.

    Greyscale palettes are taken as-is, other palettes and 24-bit pixels are
    reduced by Rec. 601 luminance.
    """
    data = Path(path).read_bytes()
    if data[:2] != b"BM":
        raise BMPError(f"{path}: not a BMP file")
    if len(data) < 18:
        raise TruncatedBMPError(f"{path}: file header truncated")
    (pixel_offset,) = struct.unpack_from("<I", data, 10)
    (header_size,) = struct.unpack_from("<I", data, 14)
    if len(data) < 14 + header_size:
        raise TruncatedBMPError(f"{path}: info header truncated")
    if header_size == 12:
        width, height, _, bpp = struct.unpack_from("<HHHH", data, 18)
        compression = 0
        palette_entry = 3
        colors_used = 0
    elif header_size >= 40:
        width, height, _, bpp, compression = struct.unpack_from("<iiHHI", data, 18)
        (colors_used,) = struct.unpack_from("<I", data, 46)
        palette_entry = 4
    else:
        raise BMPError(f"{path}: unsupported info header size {header_size}")

    if compression != 0:
        raise CompressedBMPError(f"{path}: compressed BMP (method {compression}) not supported")
    if bpp not in (8, 24):
        raise UnsupportedBitDepthError(f"{path}: {bpp}-bit BMP not supported")
    top_down = height < 0
    height = abs(height)
    if width < 1 or height < 1:
        raise BMPError(f"{path}: empty image {width}x{height}")

    stride = (width * bpp // 8 + 3) & ~3
    end = pixel_offset + stride * height
    if len(data) < end:
        raise TruncatedBMPError(f"{path}: pixel data truncated ({len(data)} < {end} bytes)")
    rows = np.frombuffer(data, np.uint8, stride * height, pixel_offset).reshape(height, stride)
    if not top_down:
        rows = rows[::-1]

    if bpp == 24:
        px = rows[:, : width * 3].reshape(height, width, 3)
        return _luminance(px[..., 2], px[..., 1], px[..., 0])

    n_colors = colors_used or 256
    pal_start = 14 + header_size
    if len(data) < pal_start + n_colors * palette_entry:
        raise TruncatedBMPError(f"{path}: palette truncated")
    pal = np.frombuffer(data, np.uint8, n_colors * palette_entry, pal_start)
    pal = pal.reshape(n_colors, palette_entry)[:, :3]
    idx = rows[:, :width]
    if idx.max() >= n_colors:
        raise BMPError(f"{path}: palette index out of range")
    b, g, r = pal[:, 0], pal[:, 1], pal[:, 2]
    if np.array_equal(r, g) and np.array_equal(g, b):
        levels = r.astype(np.float64)
    else:
        levels = _luminance(r, g, b)
    return levels[idx]


def write_bmp(image, path) -> None:
    """Write an 8-bit greyscale BMP (values rounded and clipped to 0..255)."""
    img = np.clip(np.rint(as_image(image)), 0, 255).astype(np.uint8)
    height, width = img.shape
    stride = (width + 3) & ~3
    palette = np.repeat(np.arange(256, dtype=np.uint8), 4).reshape(256, 4)
    palette[:, 3] = 0
    offset = 14 + 40 + palette.nbytes
    size = offset + stride * height
    pixels = np.zeros((height, stride), np.uint8)
    pixels[:, :width] = img[::-1]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<2sIHHI", b"BM", size, 0, 0, offset))
        fh.write(struct.pack("<IiiHHIIiiII", 40, width, height, 1, 8, 0,
                             stride * height, 2835, 2835, 256, 0))
        fh.write(palette.tobytes())
        fh.write(pixels.tobytes())


# ---------------------------------------------------------------------------
# PGM / CSV


def to_bytes(image, normalize: bool = False) -> np.ndarray:
    img = as_image(image)
    if normalize:
        lo, hi = float(img.min()), float(img.max())
        if hi == lo:
            return np.full(img.shape, 128, np.uint8)
        img = (img - lo) * (255.0 / (hi - lo))
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def write_pgm(image, path, normalize: bool = False) -> None:
    """Binary (P5) 8-bit PGM; ``normalize`` maps ``[min, max]`` onto ``[0, 255]``."""
    payload = to_bytes(image, normalize)
    height, width = payload.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(payload.tobytes())


def write_csv_grid(grid, path) -> None:
    """Row-major CSV of a 1-D or 2-D grid with round-trip float formatting."""
    arr = np.asarray(grid)
    if arr.ndim == 1:
        arr = arr[:, None]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in arr:
            writer.writerow(_fmt(v) for v in row)


def write_csv_rows(rows, path, header=None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow(header)
        for row in rows:
            writer.writerow(_fmt(v) for v in row)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def read_csv_grid(path) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)])


# ---------------------------------------------------------------------------
# filter bank text format
#
#   matched-wavelet-filterbank 1
#   meta <key> <json value>
#   filter <name> <rows> <cols> <anchor_row> <anchor_col>
#   <rows lines of cols coefficients each, %.17g>
#   end


def export_filters(bank: FilterBank, path, metadata: dict | None = None) -> None:
    lines = [f"{FILTER_FILE_MAGIC} {FILTER_FILE_VERSION}"]
    for key, value in sorted((metadata or {}).items()):
        if not key or any(c.isspace() for c in key):
            raise ValueError(f"metadata key {key!r} must be a nonempty word")
        lines.append(f"meta {key} {json.dumps(value, sort_keys=True)}")
    for name, filt in bank.items():
        rows, cols = filt.shape
        lines.append(f"filter {name} {rows} {cols} {filt.anchor[0]} {filt.anchor[1]}")
        for row in filt.taps:
            lines.append(" ".join(format(float(v), ".17g") for v in row))
        lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")


def load_filters(path, with_metadata: bool = False):
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise MalformedBlockError(f"{path}: empty filter file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != FILTER_FILE_MAGIC:
        raise MalformedBlockError(f"{path}: missing '{FILTER_FILE_MAGIC}' header")
    if head[1] != str(FILTER_FILE_VERSION):
        raise FilterVersionError(f"{path}: unsupported format version {head[1]}")

    metadata, filters = {}, {}
    i = 1
    while i < len(lines):
        parts = lines[i].split(maxsplit=2)
        if parts[0] == "meta" and len(parts) == 3:
            try:
                metadata[parts[1]] = json.loads(parts[2])
            except json.JSONDecodeError as exc:
                raise MalformedBlockError(f"{path}: bad metadata line {lines[i]!r}") from exc
            i += 1
            continue
        fields = lines[i].split()
        if fields[0] != "filter" or len(fields) != 6:
            raise MalformedBlockError(f"{path}: unexpected line {lines[i]!r}")
        name = fields[1]
        if name not in FILTER_NAMES or name in filters:
            raise MalformedBlockError(f"{path}: unknown or repeated filter {name!r}")
        try:
            rows, cols, a0, a1 = (int(v) for v in fields[2:])
        except ValueError as exc:
            raise MalformedBlockError(f"{path}: bad filter header {lines[i]!r}") from exc
        try:
            stop = lines.index("end", i + 1)
        except ValueError as exc:
            raise MalformedBlockError(f"{path}: filter {name} has no 'end'") from exc
        try:
            values = [float(v) for ln in lines[i + 1 : stop] for v in ln.split()]
        except ValueError as exc:
            raise MalformedBlockError(f"{path}: non-numeric coefficient in {name}") from exc
        if rows < 1 or cols < 1 or len(values) != rows * cols:
            raise FilterShapeError(
                f"{path}: filter {name} declares {rows}x{cols} but has {len(values)} coefficients"
            )
        if not all(math.isfinite(v) for v in values):
            raise MalformedBlockError(f"{path}: non-finite coefficient in {name}")
        try:
            filters[name] = Filter2D(np.array(values).reshape(rows, cols), (a0, a1))
        except ValueError as exc:
            raise FilterShapeError(f"{path}: {exc}") from exc
        i = stop + 1

    missing = [n for n in FILTER_NAMES if n not in filters]
    if missing:
        raise MalformedBlockError(f"{path}: missing filters {missing}")
    try:
        bank = FilterBank(*(filters[n] for n in FILTER_NAMES))
    except ValueError as exc:
        raise FilterShapeError(f"{path}: {exc}") from exc
    return (bank, metadata) if with_metadata else bank
