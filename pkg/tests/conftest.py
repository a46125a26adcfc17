import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

from aoibuf.source import ArSourceModel, reference_model  # noqa: E402


@pytest.fixture
def ar4():
    return reference_model(0.8)


@pytest.fixture
def ar1():
    return ArSourceModel(1, (0.5,), 1.0, 1.0)


@pytest.fixture
def white():
    return ArSourceModel(1, (0.0,), 1.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
