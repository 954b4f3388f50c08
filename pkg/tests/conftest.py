import math

import pytest

from dcesim.physics import DeviceParams, DriveParams, SpectralEnvironment

TWO_PI = 2 * math.pi


@pytest.fixture
def dev():
    return DeviceParams()


@pytest.fixture
def flat():
    return SpectralEnvironment.flat()


@pytest.fixture
def drive(dev):
    """10 GHz pump with v_e/c_0 = 0.05."""
    return DriveParams.from_velocity_ratio(TWO_PI * 10e9, 0.05, dev)


def within_se(value, expected, se, k=4.0):
    return abs(value - expected) < k * se


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
