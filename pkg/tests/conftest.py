import numpy as np
import pytest

from blcirs import CsrMatrix, gen_convection_diffusion, gen_rhs


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture(scope="session")
def small_problem():
    """Well-conditioned convection-diffusion instance for solver tests."""
    a = gen_convection_diffusion(16, 16, 20.0, 10.0)
    b = gen_rhs(a.n, 4, seed=11)
    return a, b


@pytest.fixture(scope="session")
def identity_problem():
    a = CsrMatrix.identity(8)
    b = gen_rhs(8, 3, seed=5)
    return a, b


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for status in ("passed", "failed", "skipped", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid:
                continue
            if getattr(report, "when", "call") not in ("call", "setup"):
                continue
            name = nodeid.split("::")[-1]
            lines.append(f"{name}: {status.upper()}")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(lines)):
            terminalreporter.write_line(line)
