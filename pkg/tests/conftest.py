import numpy as np
import pytest

from omegadiv import BankruptcyRate, LevyModel, ScaleBasis, build_table
from omegadiv.optimizer import optimize
from omegadiv.policy import value_table

Q = 0.025
BETA = 0.001

# (criterion, part, passed, detail) rows printed at the end of the run
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def model():
    return LevyModel(0.075, 0.5, 0.5, ((1.0, 9.0),))


@pytest.fixture(scope="session")
def omega():
    return BankruptcyRate.linear(-1.0, 1.5, -0.15)


@pytest.fixture(scope="session")
def basis(model):
    return ScaleBasis.from_model(model, Q)


@pytest.fixture(scope="session")
def table(model, omega):
    return build_table(model, Q, omega, x_max=10.0, h=1e-3, check=True)


@pytest.fixture(scope="session")
def optimum(table):
    return optimize(table, BETA)


@pytest.fixture(scope="session")
def vt(table, optimum):
    return value_table(table, optimum[0], Q)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def record():
    def _record(crit, part, passed, detail):
        ACCEPTANCE_LINES.append((crit, part, bool(passed), detail))
        print(f"criterion {crit}{part}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    by_crit = {}
    for crit, part, ok, detail in ACCEPTANCE_LINES:
        by_crit.setdefault(crit, []).append((part, ok, detail))
    for crit in sorted(by_crit):
        parts = by_crit[crit]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{p + ': ' if p else ''}{'ok' if ok else 'FAILED'} ({d})" for p, ok, d in parts)
        terminalreporter.write_line(f"criterion {crit}: {status}  {detail}")
