import numpy as np
import pytest

from src.psd_psro.games import build_kuhn, build_rps


@pytest.fixture(scope="session")
def kuhn():
    return build_kuhn()


@pytest.fixture(scope="session")
def rps():
    return build_rps()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
