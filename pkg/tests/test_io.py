import csv
import struct

import numpy as np
import pytest
from PIL import Image

from matched_wavelet.filterbank import pr_error, quincunx_haar_bank
from matched_wavelet.io import (
    BMPError,
    CompressedBMPError,
    FilterShapeError,
    FilterVersionError,
    MalformedBlockError,
    TruncatedBMPError,
    UnsupportedBitDepthError,
    export_filters,
    load_filters,
    read_bmp,
    read_csv_grid,
    write_bmp,
    write_csv_grid,
    write_pgm,
)
from matched_wavelet.lattice import coset_mask
from matched_wavelet.training import TrainConfig, train

from conftest import DATA, random_bank


def bmp_bytes(width, height, bpp, rows, palette=b"", compression=0, top_down=False):
    """Assemble a BITMAPINFOHEADER BMP; ``rows`` are unpadded, top row first."""
    stride = (width * bpp // 8 + 3) & ~3
    body = b"".join(r + b"\x00" * (stride - len(r)) for r in (rows if top_down else rows[::-1]))
    offset = 14 + 40 + len(palette)
    header = struct.pack("<2sIHHI", b"BM", offset + len(body), 0, 0, offset)
    info = struct.pack("<IiiHHIIiiII", 40, width, -height if top_down else height, 1, bpp,
                       compression, len(body), 0, 0, len(palette) // 4, 0)
    return header + info + palette + body


class TestReadBMP:
    def test_white_24bit(self, tmp_path):
        p = tmp_path / "w.bmp"
        p.write_bytes(bmp_bytes(2, 2, 24, [b"\xff" * 6, b"\xff" * 6]))
        img = read_bmp(p)
        assert img.shape == (2, 2)
        assert np.all(img == 255.0)

    def test_red_luminance(self, tmp_path):
        p = tmp_path / "r.bmp"
        red = b"\x00\x00\xff"  # stored as B, G, R
        p.write_bytes(bmp_bytes(2, 2, 24, [red * 2, red * 2]))
        assert read_bmp(p) == pytest.approx(np.full((2, 2), 76.245), abs=1e-12)

    def test_row_order_and_padding(self, tmp_path):
        # 3x2 24-bit: rows need one padding byte each
        rows = [bytes([10, 10, 10, 20, 20, 20, 30, 30, 30]), bytes([40, 40, 40, 50, 50, 50, 60, 60, 60])]
        p = tmp_path / "o.bmp"
        p.write_bytes(bmp_bytes(3, 2, 24, rows))
        assert read_bmp(p).tolist() == [[10, 20, 30], [40, 50, 60]]
        p.write_bytes(bmp_bytes(3, 2, 24, rows, top_down=True))
        assert read_bmp(p).tolist() == [[10, 20, 30], [40, 50, 60]]

    def test_grey_palette_is_as_is(self, tmp_path):
        pal = b"".join(bytes([i, i, i, 0]) for i in range(256))
        p = tmp_path / "g.bmp"
        p.write_bytes(bmp_bytes(3, 3, 8, [bytes([0, 1, 2]), bytes([100, 101, 102]), bytes([253, 254, 255])], pal))
        assert read_bmp(p).tolist() == [[0, 1, 2], [100, 101, 102], [253, 254, 255]]

    def test_colour_palette_uses_luminance(self, tmp_path):
        pal = bytes([0, 0, 255, 0, 255, 0, 0, 0])  # index 0 red, index 1 blue
        p = tmp_path / "c.bmp"
        p.write_bytes(bmp_bytes(2, 1, 8, [bytes([0, 1])], pal))
        assert read_bmp(p) == pytest.approx(np.array([[76.245, 29.07]]), abs=1e-12)

    def test_compressed(self, tmp_path):
        p = tmp_path / "rle.bmp"
        p.write_bytes(bmp_bytes(2, 2, 8, [b"\x00\x00"] * 2, bytes(1024), compression=1))
        with pytest.raises(CompressedBMPError):
            read_bmp(p)

    def test_bit_depth(self, tmp_path):
        p = tmp_path / "16.bmp"
        p.write_bytes(bmp_bytes(2, 2, 16, [b"\x00" * 4] * 2))
        with pytest.raises(UnsupportedBitDepthError):
            read_bmp(p)

    def test_truncated(self, tmp_path):
        data = bmp_bytes(4, 4, 24, [b"\x01" * 12] * 4)
        p = tmp_path / "t.bmp"
        p.write_bytes(data[:-5])
        with pytest.raises(TruncatedBMPError):
            read_bmp(p)
        p.write_bytes(data[:16])
        with pytest.raises(TruncatedBMPError):
            read_bmp(p)

    def test_not_bmp(self, tmp_path):
        p = tmp_path / "x.bmp"
        p.write_bytes(b"P5\n1 1\n255\n\x00")
        with pytest.raises(BMPError):
            read_bmp(p)

    def test_errors_are_distinct(self):
        kinds = {CompressedBMPError, UnsupportedBitDepthError, TruncatedBMPError}
        assert len(kinds) == 3
        assert all(issubclass(k, BMPError) for k in kinds)

    def test_write_read_identity(self, tmp_path, rng):
        img = rng.integers(0, 256, (5, 7)).astype(float)
        write_bmp(img, tmp_path / "f.bmp")
        assert np.array_equal(read_bmp(tmp_path / "f.bmp"), img)
        assert np.array_equal(np.asarray(Image.open(tmp_path / "f.bmp")), img)

    def test_fixtures(self):
        assert read_bmp(DATA / "cameraman_64.bmp").shape == (64, 64)
        assert read_bmp(DATA / "cameraman_512.bmp").shape == (512, 512)


class TestPGM:
    def test_single_zero(self, tmp_path):
        write_pgm(np.zeros((1, 1)), tmp_path / "z.pgm")
        assert (tmp_path / "z.pgm").read_bytes() == b"P5\n1 1\n255\n\x00"

    def test_constant_normalised(self, tmp_path):
        write_pgm(np.full((3, 4), -7.5), tmp_path / "c.pgm", normalize=True)
        data = (tmp_path / "c.pgm").read_bytes()
        assert data.endswith(bytes([128]) * 12)

    def test_normalise_range(self, tmp_path):
        write_pgm(np.array([[-1.0, 0.0, 1.0]]), tmp_path / "n.pgm", normalize=True)
        assert np.asarray(Image.open(tmp_path / "n.pgm")).tolist() == [[0, 128, 255]]

    def test_round_trip_with_pillow(self, tmp_path, rng):
        img = rng.integers(0, 256, (6, 9)).astype(float)
        write_pgm(img, tmp_path / "r.pgm")
        back = np.asarray(Image.open(tmp_path / "r.pgm"))
        assert back.shape == (6, 9)
        assert np.array_equal(back, img)

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            write_pgm(np.zeros((1, 1)), tmp_path / "missing" / "x.pgm")


class TestCSV:
    def test_scalar(self, tmp_path):
        write_csv_grid(np.array([[1.5]]), tmp_path / "a.csv")
        assert (tmp_path / "a.csv").read_text() == "1.5\n"

    def test_shape(self, tmp_path):
        write_csv_grid(np.arange(4.0).reshape(2, 2), tmp_path / "b.csv")
        lines = (tmp_path / "b.csv").read_text().splitlines()
        assert len(lines) == 2 and all(len(ln.split(",")) == 2 for ln in lines)

    def test_full_precision(self, tmp_path, rng):
        grid = rng.normal(size=(5, 3)) * 10.0 ** rng.integers(-20, 20, (5, 3))
        write_csv_grid(grid, tmp_path / "c.csv")
        with open(tmp_path / "c.csv", newline="") as fh:
            back = np.array([[float(v) for v in row] for row in csv.reader(fh)])
        assert np.array_equal(back, grid)
        assert np.array_equal(read_csv_grid(tmp_path / "c.csv"), grid)

    def test_deterministic(self, tmp_path, rng):
        grid = rng.normal(size=(4, 4))
        write_csv_grid(grid, tmp_path / "1.csv")
        write_csv_grid(grid, tmp_path / "2.csv")
        assert (tmp_path / "1.csv").read_bytes() == (tmp_path / "2.csv").read_bytes()


class TestFilterFile:
    def test_haar_round_trip(self, tmp_path):
        export_filters(quincunx_haar_bank(), tmp_path / "h.txt")
        assert load_filters(tmp_path / "h.txt") == quincunx_haar_bank()

    def test_bit_exact_random(self, tmp_path, rng):
        bank = random_bank(rng, 4, (1, 2), scale=1e-3)
        meta = {"source_image": "x.bmp", "final_psnr": 71.25, "iterations": 12}
        export_filters(bank, tmp_path / "r.txt", meta)
        back, back_meta = load_filters(tmp_path / "r.txt", with_metadata=True)
        for a, b in zip(bank.filters(), back.filters()):
            assert a.anchor == b.anchor
            assert a.taps.tobytes() == b.taps.tobytes()
        assert back_meta == meta

    def test_shape_error(self, tmp_path):
        export_filters(quincunx_haar_bank(), tmp_path / "h.txt")
        text = (tmp_path / "h.txt").read_text().replace("filter h1 1 2", "filter h1 2 2")
        (tmp_path / "bad.txt").write_text(text)
        with pytest.raises(FilterShapeError):
            load_filters(tmp_path / "bad.txt")

    def test_version_error(self, tmp_path):
        export_filters(quincunx_haar_bank(), tmp_path / "h.txt")
        text = (tmp_path / "h.txt").read_text().replace("filterbank 1", "filterbank 99")
        (tmp_path / "v.txt").write_text(text)
        with pytest.raises(FilterVersionError):
            load_filters(tmp_path / "v.txt")

    @pytest.mark.parametrize("mutate", [
        lambda t: t.replace("end\n", "", 1),
        lambda t: t.replace("filter f1", "filter g1"),
        lambda t: t.replace("0.70710678118654746", "abc", 1),
        lambda t: "",
    ])
    def test_malformed(self, tmp_path, mutate):
        export_filters(quincunx_haar_bank(), tmp_path / "h.txt")
        (tmp_path / "m.txt").write_text(mutate((tmp_path / "h.txt").read_text()))
        with pytest.raises(MalformedBlockError):
            load_filters(tmp_path / "m.txt")

    def test_mismatched_filter_shapes(self, tmp_path):
        text = "matched-wavelet-filterbank 1\n"
        for name, shape in (("h0", (1, 1)), ("h1", (1, 1)), ("f0", (1, 1)), ("f1", (1, 2))):
            text += f"filter {name} {shape[0]} {shape[1]} 0 0\n" + " ".join(["1"] * shape[1]) + "\nend\n"
        (tmp_path / "s.txt").write_text(text)
        with pytest.raises(FilterShapeError):
            load_filters(tmp_path / "s.txt")

    def test_trained_bank_reload_keeps_psnr(self, tmp_path):
        img = read_bmp(DATA / "cameraman_64.bmp")[:16, :16]
        result = train(img, TrainConfig(max_iterations=300))
        export_filters(result.bank, tmp_path / "t.txt", {"iterations": result.iterations})
        m = coset_mask(16, 16)
        before = pr_error(result.bank, m, [img])
        after = pr_error(load_filters(tmp_path / "t.txt"), m, [img])
        assert before == after

    def test_export_deterministic(self, tmp_path, rng):
        bank = random_bank(rng)
        export_filters(bank, tmp_path / "1.txt", {"a": 1})
        export_filters(bank, tmp_path / "2.txt", {"a": 1})
        assert (tmp_path / "1.txt").read_bytes() == (tmp_path / "2.txt").read_bytes()
