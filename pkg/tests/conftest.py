import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def profile_01():
    from phasefield.profile import build_truncated_profile

    return build_truncated_profile(0.1)


@pytest.fixture(scope="session")
def profile_05():
    from phasefield.profile import build_truncated_profile

    return build_truncated_profile(0.5)


ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def acceptance_log():
    """Record one verdict line per acceptance criterion; printed in the terminal summary."""

    def log(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
