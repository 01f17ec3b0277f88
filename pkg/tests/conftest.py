import warnings

import pytest

from dispersim.scenario import ScenarioWarning

_CRITERIA: list[tuple[int, str, bool, str]] = []


@pytest.fixture(autouse=True)
def _quiet_scenario_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScenarioWarning)
        yield


@pytest.fixture
def criterion():
    """Record one acceptance line; printed again in the terminal summary."""

    def record(number: int, name: str, ok: bool, detail: str = "") -> None:
        _CRITERIA.append((number, name, ok, detail))
        print(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {name} {detail}".rstrip())

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {name} {detail}".rstrip())
