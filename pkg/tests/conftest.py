import pytest

from sector_blowup.evolve_1d import Sim1DConfig, run


@pytest.fixture(scope="session")
def run_513():
    """Reference blow-up run for the quadratic preset on 513 points."""
    return run(Sim1DConfig(n=513))


@pytest.fixture(scope="session")
def run_1025():
    return run(Sim1DConfig(n=1025))
