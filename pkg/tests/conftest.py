import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from swd import ClusterSet, TrialConfig  # noqa: E402

RRT_SIZES = (6, 6, 6, 4, 4, 2)
TWO_SIZE_SIZES = (20, 20, 20, 20, 10, 10, 10, 10)


@pytest.fixture
def rrt():
    return ClusterSet(RRT_SIZES)


@pytest.fixture
def rrt9():
    return TrialConfig(4, lam=9)


@pytest.fixture
def rrt19():
    return TrialConfig(4, lam=19)


@pytest.fixture
def two_size():
    return ClusterSet(TWO_SIZE_SIZES)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
