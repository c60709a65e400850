import json
from pathlib import Path

import mpmath
import pytest

from fracreg import add_noise, assemble_operator, make_example

DATA = Path(__file__).parent / "data"


def mp_ml(a, b, z):
    """Mittag-Leffler series summed in mpmath; precision covers the largest term ~ exp(|z|**(1/a))."""
    dps = 40 + int(abs(z) ** (1.0 / a) / 2.3)
    with mpmath.workdps(dps):
        zm = mpmath.mpf(z)
        return float(mpmath.nsum(lambda k: zm**k * mpmath.rgamma(a * k + b), [0, mpmath.inf]))


@pytest.fixture(scope="session")
def ml_oracle():
    return json.loads((DATA / "ml_oracle.json").read_text())


@pytest.fixture(scope="session")
def galerkin_exact():
    return json.loads((DATA / "galerkin_exact.json").read_text())


@pytest.fixture(scope="session")
def op100():
    return assemble_operator(100)


@pytest.fixture(scope="session")
def ex1(op100):
    return make_example("ex1", op=op100)


@pytest.fixture(scope="session")
def ex2(op100):
    return make_example("ex2", op=op100)


@pytest.fixture(scope="session")
def ex1_noisy(ex1):
    return add_noise(ex1, 1e-2, seed=0)


# criterion -> (passed, detail), filled by test_acceptance and echoed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
