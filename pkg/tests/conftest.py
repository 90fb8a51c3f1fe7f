import numpy as np
import pytest

from distqml import simcore


def random_state(n: int, gen: np.random.Generator) -> simcore.PureState:
    v = gen.normal(size=1 << n) + 1j * gen.normal(size=1 << n)
    return simcore.PureState(v / np.linalg.norm(v))


def random_qubit(gen: np.random.Generator) -> np.ndarray:
    v = gen.normal(size=2) + 1j * gen.normal(size=2)
    return v / np.linalg.norm(v)


@pytest.fixture
def gen():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
