import numpy as np
import pytest

from dkrr.data import SyntheticTask, generate, partition_even
from dkrr.kernel import MinKernel, WendlandKernel


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=["g1", "g2"])
def task_and_kernel(request):
    if request.param == "g1":
        return SyntheticTask("g1"), MinKernel()
    return SyntheticTask("g2"), WendlandKernel()


@pytest.fixture
def small_problem(rng):
    task = SyntheticTask("g1")
    data = generate(task, 60, True, rng)
    part = partition_even(60, 4, rng)
    return data, part, MinKernel()


# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
