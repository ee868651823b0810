from pathlib import Path

import pytest

from squeeze_forge import Schedule, build_schedule

GOLDEN = Path(__file__).parent / "golden"

# Recorded from the first run of find_m over k in [5, 25] with the default sweep.
GOLDEN_M = 2
GOLDEN_N = 3


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN


@pytest.fixture(scope="session")
def schedule6() -> Schedule:
    return build_schedule(10, 6, GOLDEN_M, GOLDEN_N)


@pytest.fixture(scope="session")
def domain6(schedule6):
    return schedule6.domain()


@pytest.fixture(scope="session")
def stack6(schedule6):
    return schedule6.stack()
