import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nkdcd.model import NkdcdModel  # noqa: E402


@pytest.fixture
def small_model():
    m = NkdcdModel.init(n=3, N=4, L=2, h=4, seed=3, lag_scale=0.3)
    rng = np.random.default_rng(11)
    for net in (m.encoder, m.decoder):
        for b in net.biases:
            b[:] = rng.normal(scale=0.2, size=b.shape)
    return m


@pytest.fixture
def small_panel():
    return np.random.default_rng(5).normal(size=(9, 3))


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
