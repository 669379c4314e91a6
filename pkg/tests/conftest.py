import numpy as np
import pytest

from crowdpulse.model import SystemParams, TargetRotation
from crowdpulse.pulses import ControlField, HanningShape


@pytest.fixture
def table_one():
    return SystemParams.table_one()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_field(rng, params, tg=20.0, scale=0.1, n_windows=3):
    """Hanning field with random complex coefficients and amplitudes."""
    def coeffs():
        return tuple(rng.normal(size=n_windows) + 1j * rng.normal(size=n_windows))

    shape1, shape2 = HanningShape(coeffs(), tg), HanningShape(coeffs(), tg)
    a1, a2 = scale * (rng.normal(size=2) + 1j * rng.normal(size=2))
    L1, L2 = rng.uniform(-0.05, 0.05, size=2)
    return ControlField(shape1, shape2, complex(a1), complex(a2), float(L1), float(L2), params)


def xx_target():
    return TargetRotation(np.pi, np.pi)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
