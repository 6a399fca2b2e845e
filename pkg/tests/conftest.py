import numpy as np
import pytest

from simcal.geometry import SimStackConfig
from simcal.scenario import load_scenario

LAMBDA = 299_792_458.0 / 28e9


@pytest.fixture(scope="session")
def tiny():
    return load_scenario("desk-tiny")


@pytest.fixture(scope="session")
def tiny_system(tiny):
    return tiny.system()


@pytest.fixture
def cfg3():
    return SimStackConfig(3, 3, LAMBDA, LAMBDA / 2, 0.01, (LAMBDA / 2) ** 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: list[tuple[str, bool, str]] = []


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE.append((criterion, bool(passed), detail))
    print(f"{'PASS' if passed else 'FAIL'} {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {criterion}: {detail}")
