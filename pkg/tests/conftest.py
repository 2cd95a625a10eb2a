import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from regent.automata import build_tomita, minimize, sl4, sp8  # noqa: E402


@pytest.fixture(scope="session")
def tomita_min():
    return {k: minimize(build_tomita(k)) for k in range(1, 8)}


@pytest.fixture(scope="session")
def builders():
    """All nine grammars of the evaluation, unminimized."""
    out = {f"tomita{k}": build_tomita(k) for k in range(1, 8)}
    out["sl4"] = sl4()
    out["sp8"] = sp8()
    return out


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
