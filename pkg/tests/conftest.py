import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from picol.network import bundled_graph  # noqa: E402


@pytest.fixture(scope="session")
def graph():
    return bundled_graph()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import acceptance_report

    if acceptance_report.RESULTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in acceptance_report.lines():
            terminalreporter.write_line(line)
