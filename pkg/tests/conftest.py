from importlib.resources import files

import pytest

from seesim.netlist import load_design


def data_text(name: str) -> str:
    return files("seesim.data").joinpath(name).read_text()


def data_path(name: str) -> str:
    return str(files("seesim.data").joinpath(name))


@pytest.fixture(scope="session")
def two_module():
    return load_design(data_text("two_module.v"))


@pytest.fixture(scope="session")
def minisoc():
    return load_design(data_text("minisoc.v"))


# acceptance criteria report their verdicts here; printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
