import numpy as np
import pytest

from esr.dataio.synthetic import make_synthetic_samples

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synthetic():
    """40 small synthetic training images and 10 test images."""
    train = make_synthetic_samples(40, n_fp=12, image_size=64, noise_sigma=2.0, seed=3)
    test = make_synthetic_samples(10, n_fp=12, image_size=64, noise_sigma=2.0, seed=4)
    return train, test


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
