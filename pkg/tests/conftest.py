import sys

import numpy as np
import pytest

from lyapmc.potential import make_shape


@pytest.fixture
def unit_bump_1d():
    """Indicator of [-1/2, 1/2] with amplitude 1."""
    return make_shape(1, "ball-indicator", {"radius": 0.5, "amplitude": 1.0})


@pytest.fixture
def two_level_1d():
    return make_shape(1, "radial-step", {"radii": [0.25, 0.5], "amplitudes": [3.0, 1.0]})


@pytest.fixture
def disk_2d():
    return make_shape(2, "ball-indicator", {"radius": 0.5, "amplitude": 2.0})


@pytest.fixture
def table_3d():
    vals = np.random.default_rng(3).random((3, 4, 2))
    vals[0, 0, 0] = 0.0
    return make_shape(3, "grid-table", {"values": vals.tolist(), "pitch": 0.3})


def pytest_terminal_summary(terminalreporter):
    lines = getattr(sys.modules.get("test_acceptance"), "LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
