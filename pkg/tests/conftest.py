import pytest

from ellq.certificate import certify
from ellq.experiments import case_systems
from ellq.linalg import direct_solve


@pytest.fixture(scope="session")
def systems16():
    return case_systems(16)


@pytest.fixture(scope="session")
def systems8():
    return case_systems(8)


@pytest.fixture(scope="session")
def cert16(systems16):
    return certify(systems16["I"])


@pytest.fixture(scope="session")
def cert8(systems8):
    return certify(systems8["I"])


@pytest.fixture(scope="session")
def xstar16(systems16):
    return {k: direct_solve(s) for k, s in systems16.items()}
