"""Shared fixtures and the acceptance-summary reporting hook.

Expensive artifacts (the big d = 3 kernel table, the spectral table) are
session-scoped and shared between the unit tests and the acceptance tests;
they are also memoized inside the package, so the acceptance test that
times a fresh build purges the memo first and every later user gets the
rebuilt table for free.
"""

import os

# pin the BLAS/thread configuration before numpy loads so every in-process
# result is reproducible regardless of the ambient machine configuration
for _k in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS",
           "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    os.environ.setdefault(_k, "1")

import numpy as np
import pytest

from lrkit.lattice import Potential
from lrkit.quadrature import kernel_Kl
from lrkit.specfn import spectral_table


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance_report(request):
    """Callable that records one '[criterion NN] PASS/FAIL ...' line."""
    lines = request.config._acceptance_lines

    def record(line: str):
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def table_d3_L60():
    """K_2 on |x|_inf <= 60 in d = 3 (the workhorse table)."""
    return kernel_Kl(3, 2, 60)


@pytest.fixture(scope="session")
def table_d3_l1_L40():
    return kernel_Kl(3, 1, 40)


@pytest.fixture(scope="session")
def table_d4_L30():
    return kernel_Kl(4, 2, 30)


@pytest.fixture(scope="session")
def dos_table_32():
    """Spectral-density table covering offsets |x|_inf <= 32."""
    return spectral_table(32)


@pytest.fixture(scope="session")
def critical_delta(table_d3_L60):
    """The delta well tuned so the Birman-Schwinger eigenvalue is -1."""
    k0 = table_d3_L60.value(np.zeros(3, dtype=int))
    return Potential.delta(3, -1.0 / k0)
