import numpy as np
import pytest

from varint import InitialCondition, make_damped_oscillator, make_double_well

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record():
    def _record(key, ok, detail):
        ACCEPTANCE[str(key)] = (bool(ok), detail)
        return ok
    return _record


@pytest.fixture
def dw():
    return make_double_well()


@pytest.fixture
def osc():
    return make_damped_oscillator(m=1.0, k=4.0, c=0.0)


@pytest.fixture
def ic074():
    return InitialCondition([0.74], [0.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
