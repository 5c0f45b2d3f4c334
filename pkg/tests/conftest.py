import pytest

from squarelimits.pipeline import run_pipeline
from squarelimits.scenario import reference_scenario

_CRITERIA: dict[int, str] = {}


def record_criterion(k: int, name: str, ok: bool, detail: str) -> None:
    _CRITERIA[k] = f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    print(_CRITERIA[k])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[k])


@pytest.fixture(scope="session")
def m3_artifacts():
    """The three-family point-target build, shared across test modules."""
    return run_pipeline(reference_scenario("point-targets-m3"), verify=False)


@pytest.fixture(scope="session")
def m2_artifacts():
    return run_pipeline(reference_scenario("point-targets-m2"), verify=False)
