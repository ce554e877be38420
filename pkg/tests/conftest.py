import pytest

from memrc.bifurcation import DEFAULT_CALIBRATION

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def default_cal():
    return DEFAULT_CALIBRATION


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("feature_cache")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
