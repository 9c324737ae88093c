import pytest

from wgqed.lattice import EmitterSpecies, SystemSpec, WaveguideSpec

ACCEPTANCE_LINES = []


@pytest.fixture
def wg():
    return WaveguideSpec(omega_c=0.0, hopping_J=0.5, num_sites=2001, coupling_site=1000)


@pytest.fixture
def small_wg():
    return WaveguideSpec(omega_c=0.0, hopping_J=0.5, num_sites=201)


def one_species(wg, delta, V, M, m):
    return SystemSpec(wg, (EmitterSpecies("A", wg.omega_c + delta, V, M, m),))


def two_species(wg, dA, dB, VA, VB, MA, MB, mA):
    return SystemSpec(wg, (EmitterSpecies("A", wg.omega_c + dA, VA, MA, mA),
                           EmitterSpecies("B", wg.omega_c + dB, VB, MB, 0)))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
