import numpy as np
import pytest

from ifelab.geometry import LevelSet


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance pass/fail lines in every run mode."""
    import _acceptance_log

    if _acceptance_log.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_log.RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture
def circle_ls():
    """Circle of radius 0.5 centered at the origin (negative inside)."""
    return LevelSet(
        phi=lambda x: x[..., 0] ** 2 + x[..., 1] ** 2 - 0.25,
        grad=lambda x: 2.0 * np.asarray(x, float),
    )


@pytest.fixture
def diagonal_ls():
    """Straight interface along x1 = x2 (positive below the diagonal)."""
    s = 1.0 / np.sqrt(2.0)
    return LevelSet(
        phi=lambda x: (x[..., 0] - x[..., 1]) * s,
        grad=lambda x: np.broadcast_to(np.array([s, -s]), np.asarray(x).shape).copy(),
    )
