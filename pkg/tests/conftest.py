import numpy as np
import pytest
from hypothesis import settings

from roadrti.experiments import line_weights, roadside_grid, roadside_layout
from roadrti.grid import GridSpec
from roadrti.priors import build_q

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def road():
    """Roadside geometry: 18 poles at 2 m, 16x2x3 grid, Line/Line weights."""
    grid = roadside_grid(2.0)
    w = line_weights(grid, roadside_layout(2.0))
    return grid, w, build_q(grid)


@pytest.fixture
def unit_grid():
    return GridSpec(1, 1, 1, 1.0, 1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion at the end of the run
_criteria: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        verdict = "PASS" if report.outcome == "passed" else "FAIL"
        _criteria[props["criterion"]] = (verdict, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda s: int(s.split()[0])):
        verdict, detail = _criteria[name]
        terminalreporter.write_line(f"{verdict}  criterion {name}  {detail}")
