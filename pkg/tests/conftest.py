import pathlib

import pytest

DATA = pathlib.Path(__file__).parent / "data"

_acceptance_results: list[tuple[str, str]] = []


@pytest.fixture
def data_dir() -> pathlib.Path:
    return DATA


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _acceptance_results.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance_results:
        status = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{name}: {status}")
