import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from axlab.envs import make_chain, make_coin, make_gridworld  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def chain3():
    return make_chain(3)


@pytest.fixture
def coin():
    return make_coin(0.5)


@pytest.fixture
def grid33():
    return make_gridworld(3, 3, 0.1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
