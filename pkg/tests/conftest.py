import pytest

from stationflow import engine, state
from stationflow.parser import parse_source

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one pass/fail line per acceptance criterion and assert it."""
    def record(ok, line):
        _ACCEPTANCE_LINES.append(("PASS " if ok else "FAIL ") + line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def run_cg():
    def go(text, scheduler="eager", seed=0, fuel=200_000, **kw):
        prog = parse_source(text, "test.cg")
        return engine.run(state.init(prog), scheduler=scheduler, seed=seed,
                          fuel=fuel, **kw)
    return go


@pytest.fixture
def init_cg():
    def go(text):
        return state.init(parse_source(text, "test.cg"))
    return go
