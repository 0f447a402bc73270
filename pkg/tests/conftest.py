import numpy as np
import pytest

from gostbec import Params, continue_branch, make_grid, newton_solve, seed_state

NU = BETA = GAMMA = 0.5


@pytest.fixture(scope="session")
def small_grid():
    # 10 x 14 box at spacing 0.2; big enough that the l<=1 modes decay
    return make_grid(10.0, 14.0, 51, 71)


@pytest.fixture(scope="session")
def params_s0():
    return Params.from_dimensionless(NU, BETA, GAMMA, 0)


@pytest.fixture(scope="session")
def params_s1():
    return Params.from_dimensionless(NU, BETA, GAMMA, 1)


def _solve(mode, params, grid, mu, label):
    guess, _ = seed_state(mode, params, grid, mu)
    return newton_solve(guess, mu, params, branch=label, mode=mode)


@pytest.fixture(scope="session")
def a0_small(small_grid, params_s0):
    return _solve((0, 0, 0), params_s0, small_grid, 6.0, "A0")


@pytest.fixture(scope="session")
def a1_small(small_grid, params_s0):
    # excited seeds need the overlap-guarded continuation to reach large mu
    branch = continue_branch((0, 0, 1), params_s0, 6.0, dmu=0.25,
                             grid=small_grid, label="A1")
    return branch.points[-1]


@pytest.fixture(scope="session")
def b0_small(small_grid, params_s1):
    return _solve((1, 0, 0), params_s1, small_grid, 5.5, "B0")


def rng(seed=0):
    return np.random.default_rng(seed)


# Acceptance tests push one verdict line each; echo them after the run so
# they survive pytest's output capture.
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    def record(line):
        ACCEPTANCE_LINES.append(line)
        print(line, flush=True)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
