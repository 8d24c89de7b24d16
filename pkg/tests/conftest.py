import os
from pathlib import Path

import numpy as np
import pytest

DATA_DIR = Path(__file__).parent / "data"
RV_FIXTURE = DATA_DIR / "rv_fixture.csv"

# Real-data tests look for the Oxford-Man extract here or in LMFORECAST_RV_DATA.
# Only the tests read the environment; the library and CLI never do.
_RV_CANDIDATES = [
    Path(__file__).resolve().parents[1] / "data" / "oxfordmanrealizedvolatilityindices.csv",
]


def real_rv_path():
    env = os.environ.get("LMFORECAST_RV_DATA")
    if env:
        return Path(env)
    for p in _RV_CANDIDATES:
        if p.is_file():
            return p
    return None


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def rv_fixture_path():
    return RV_FIXTURE


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES: list[str] = []


def report(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
