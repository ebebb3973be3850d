"""Shared fixtures and the acceptance-report hook.

Acceptance tests register a one-line verdict via the `acceptance_log`
fixture; the terminal summary prints all collected lines so the pass/fail
status of each criterion is visible even without -s.
"""

import numpy as np
import pytest

try:
    from hypothesis import settings
    settings.register_profile("suite", deadline=None, derandomize=True,
                              max_examples=50)
    settings.load_profile("suite")
except ImportError:
    pass

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    def record(number, label, passed, detail=""):
        verdict = "PASS" if passed else "FAIL"
        suffix = f"  [{detail}]" if detail else ""
        _ACCEPTANCE_LINES.append(
            (number, f"criterion {number:2d} {label}: {verdict}{suffix}"))
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
