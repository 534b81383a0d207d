from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fpd import fixture_text, load_fixture  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def collar():
    return load_fixture("collar.fpd")


@pytest.fixture
def decomposed():
    return load_fixture("collar_decomposed.fpd")


@pytest.fixture
def collar_source():
    return fixture_text("collar.fpd")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
