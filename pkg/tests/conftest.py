import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sphere_bubbling.bubbles import constants_table  # noqa: E402
from sphere_bubbling.geometry import ProblemParams  # noqa: E402


@pytest.fixture(scope="session")
def params():
    return ProblemParams(4, 0.5)


@pytest.fixture(scope="session")
def ct(params):
    return constants_table(params)


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("acceptance_lib")
    lines = getattr(acc, "SUMMARY_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda t: int(t.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
