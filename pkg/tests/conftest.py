import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from teamreach import bench_gen  # noqa: E402
from teamreach.smt_bridge import SolverEndpoint  # noqa: E402


@pytest.fixture
def door():
    return bench_gen.door_game()


@pytest.fixture
def memory():
    return bench_gen.memory_game()


@pytest.fixture(scope="session")
def smt_endpoint():
    ep = SolverEndpoint.from_env()
    if ep is None:
        pytest.skip("no SMT solver available")
    return ep


def has_z3() -> bool:
    return shutil.which("z3") is not None
