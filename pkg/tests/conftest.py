import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fprw import FactorSpec, ModelSpec, get_scenario  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def counterexample():
    return get_scenario("counterexample").spec


@pytest.fixture(scope="session")
def z2z3():
    return get_scenario("group-z2z3").spec


@pytest.fixture(scope="session")
def example1():
    return get_scenario("example1").spec


@pytest.fixture(scope="session")
def z2z2():
    """Recurrent walk on Z2 * Z2 (the infinite dihedral group)."""
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    return ModelSpec(FactorSpec(2, 0, swap), FactorSpec(2, 0, swap.copy()), 0.5)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
