import functools

import pytest

from vfl.torus import FlatTorus
from vfl.vortex import Divisor, solve_vortex

ACCEPTANCE_LINES: list[str] = []


def report(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@functools.lru_cache(maxsize=64)
def cached_solve(modulus: complex, grid_n: int, points: tuple, tau: float):
    torus = FlatTorus(modulus, grid_n)
    return solve_vortex(torus, Divisor(points), tau)


@pytest.fixture
def solved():
    return cached_solve
