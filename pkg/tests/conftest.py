import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    The test stores details in the returned dict; the line is written whether
    the test body passes or raises.
    """
    info = {"detail": ""}
    yield info
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    line = f"{request.node.name}: {'PASS' if ok else 'FAIL'} {info['detail']}".rstrip()
    ACCEPTANCE_LINES[request.node.name] = line
    print(line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES.values():
            terminalreporter.write_line(line)
