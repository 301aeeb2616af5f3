import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from afrelay.scenario import FIGURE2_ALPHABET, figure2_scenario  # noqa: E402
from afrelay.sim import figure2_rates  # noqa: E402


@pytest.fixture(scope="session")
def fig2_rates():
    return figure2_rates()


@pytest.fixture
def fig2():
    return figure2_scenario(0.5)


@pytest.fixture(scope="session")
def fig2_alphabet():
    return FIGURE2_ALPHABET


_ACCEPTANCE: dict[int, tuple[str, list[str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    number, title = marker.args
    _ACCEPTANCE.setdefault(number, (title, []))[1].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, outcomes = _ACCEPTANCE[number]
        status = "PASS" if outcomes and all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {title}")
