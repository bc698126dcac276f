import numpy as np
import pytest

from hhilab.geometry import ModelParams, build_model, hawking_beta
from hhilab.operators import assemble_epsilon_squared, spectral_decompose

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def small_model():
    return build_model(ModelParams(N=60))


@pytest.fixture(scope="session")
def small_spec(small_model):
    return spectral_decompose(assemble_epsilon_squared(small_model))


@pytest.fixture(scope="session")
def base_model():
    return build_model(ModelParams())


@pytest.fixture(scope="session")
def base_spec(base_model):
    return spectral_decompose(assemble_epsilon_squared(base_model))


@pytest.fixture(scope="session")
def beta_h():
    return hawking_beta(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
