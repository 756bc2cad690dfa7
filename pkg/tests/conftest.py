from pathlib import Path

import numpy as np
import pytest

from matched_wavelet.filterbank import Filter2D, FilterBank

DATA = Path(__file__).parent / "data"

ACCEPTANCE_LINES = []


def pytest_addoption(parser):
    parser.addoption(
        "--paper-iterations",
        type=int,
        default=1000,
        help="iteration cap for the 512x512 paper-protocol run (>= 1000; 15000 for the full protocol)",
    )


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def data_dir():
    return DATA


def random_bank(rng, size=3, anchor=None, scale=0.5):
    anchor = anchor if anchor is not None else (size // 2, size // 2)
    return FilterBank(*(Filter2D(rng.normal(0.0, scale, (size, size)), anchor) for _ in range(4)))
