import pytest

from qdmemory.grid import SimGrid, make_waveform
from qdmemory.medium import lookup_scheme
from qdmemory.optimizer import default_init_pulse


@pytest.fixture(scope="session")
def small_grid():
    return SimGrid(120, 160, 10.0)


@pytest.fixture(scope="session")
def photon(small_grid):
    return make_waveform("sharp-exponential", 1.0, small_grid)


@pytest.fixture(scope="session")
def trial_pulse(small_grid):
    return default_init_pulse(small_grid)


@pytest.fixture(scope="session")
def ideal():
    return lookup_scheme("ideal-3L", d=20.0)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per criterion; ``known`` turns a failure into an xfail."""
    def record(number: int, ok: bool, detail: str, known: str | None = None):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        if not ok:
            if known:
                pytest.xfail(known)
            pytest.fail(line, pytrace=False)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
