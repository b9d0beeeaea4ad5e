from __future__ import annotations

import pytest

from clauseroute.prior import build_library
from clauseroute.zoo import load_bundled_zoo


@pytest.fixture(scope="session")
def zoo():
    return load_bundled_zoo()


@pytest.fixture(scope="session")
def lib(zoo):
    return build_library(zoo)


def pytest_terminal_summary(terminalreporter):
    results = getattr(__import__("sys").modules.get("test_acceptance"), "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
