import numpy as np
import pytest

from fracvisco.fracops import TimeGrid, TimeSeries
from fracvisco.verify import bump


@pytest.fixture
def unit_grid():
    return TimeGrid(0.0, 1.0, 256)


def make_series(fn, n_steps=256, t_start=0.0, t_end=1.0):
    return TimeSeries.from_function(TimeGrid(t_start, t_end, n_steps), fn)


def bump_series(n_steps=1024, center=0.5, width=0.3):
    return make_series(lambda t: bump(t, center, width), n_steps)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
