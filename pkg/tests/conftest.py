import numpy as np
import pytest

from gsnoise import GsParams, RandomStream, SpdMatrix, sample_gs_sequence

TOEPLITZ_2 = np.array([[1.0, 0.7], [0.7, 1.0]])
TOEPLITZ_5 = np.array(
    [
        [1.0, 0.8, 0.6, 0.4, 0.2],
        [0.8, 1.0, 0.8, 0.6, 0.4],
        [0.6, 0.8, 1.0, 0.8, 0.6],
        [0.4, 0.6, 0.8, 1.0, 0.8],
        [0.2, 0.4, 0.6, 0.8, 1.0],
    ]
)


@pytest.fixture(scope="session")
def spd2():
    return SpdMatrix(TOEPLITZ_2)


@pytest.fixture(scope="session")
def spd5():
    return SpdMatrix(TOEPLITZ_5)


@pytest.fixture(scope="session")
def params_p2(spd2):
    """Reference p=2 configuration: alpha=1.5, rho=0.5, gamma_g=gamma_s=2."""
    return GsParams(1.5, 2.0, 2.0, 0.5, spd2)


@pytest.fixture(scope="session")
def params_p5(spd5):
    """Benchmark p=5 configuration: alpha=1.2, rho=0.5, gamma_g=gamma_s=2."""
    return GsParams(1.2, 2.0, 2.0, 0.5, spd5)


@pytest.fixture(scope="session")
def gs_sequence_p5(params_p5):
    """One long shared GS sequence (kept session-scoped; generation is the
    expensive part of many estimator tests)."""
    return sample_gs_sequence(params_p5, 10**6, RandomStream(314159))
