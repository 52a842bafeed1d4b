import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from erpladder.domain import default_config  # noqa: E402


@pytest.fixture(scope="session")
def cfg():
    return default_config()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
