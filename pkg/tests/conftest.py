import sys

import numpy as np
import pytest

from bbexact.design import build_design, model_matrix
from bbexact.moves import enumerate_basis

ASPERGILLUS = np.array([4, 3, 33, 30, 2, 5, 14, 50, 7, 21, 5, 20, 13])
ASPERGILLUS_FITTED = np.array(
    [4.04, 3.59, 31.58, 28.02, 2.12, 6.84, 16.57, 53.42, 6.29, 20.29, 5.58, 18.01, 10.64]
)


@pytest.fixture(scope="session")
def design3():
    return build_design(3)


@pytest.fixture(scope="session")
def mm3(design3):
    return model_matrix(design3)


@pytest.fixture(scope="session")
def basis3():
    return enumerate_basis(3)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance.RESULTS.values():
        terminalreporter.write_line(line)
