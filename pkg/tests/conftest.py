import numpy as np
import pytest

from ddereal.linsys import SpectrumSpec, adjoint_vector, design_linear

HOPF_OMEGA = np.pi / 2
DOUBLE_HOPF_OMEGAS = (1.0, np.sqrt(2.0))
DOUBLE_HOPF_POSITIONS = (-0.4, -1.1, -1.9, -2.6)


class Scenario:
    def __init__(self, spec, positions):
        self.spec = spec
        self.L = design_linear(spec, positions)
        self.adj = adjoint_vector(self.L, spec)


@pytest.fixture(scope="session")
def hopf():
    """z' = -(pi/2) z(t-1): a single Hopf pair at i*pi/2."""
    return Scenario(SpectrumSpec(p=1, includes_zero=False, omegas=(HOPF_OMEGA,), r=1.0), [-1.0])


@pytest.fixture(scope="session")
def steady_hopf():
    """Zero eigenvalue plus a Hopf pair at i."""
    return Scenario(SpectrumSpec(p=1, includes_zero=True, omegas=(1.0,), r=1.5 * np.pi),
                    [-np.pi / 2, -1.5 * np.pi])


@pytest.fixture(scope="session")
def double_hopf():
    return Scenario(SpectrumSpec(p=2, includes_zero=False, omegas=DOUBLE_HOPF_OMEGAS, r=3.0),
                    DOUBLE_HOPF_POSITIONS)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
