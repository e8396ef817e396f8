import numpy as np
import pytest

from ipsae.data import SyntheticConfig, generate_synthetic

REFERENCE = SyntheticConfig(d=32, k=12, n_per_class=30, C_seen=15, C_unseen=5,
                            noise_sigma=0.3, attribute_density=0.4, seed=42)


@pytest.fixture(scope="session")
def reference_dataset():
    return generate_synthetic(REFERENCE)


@pytest.fixture(scope="session")
def noiseless_dataset():
    return generate_synthetic(SyntheticConfig(noise_sigma=0.0, seed=42))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_psd(rng, n, floor=0.0):
    G = rng.standard_normal((n, n))
    return G @ G.T + floor * np.eye(n)


# -- acceptance summary -------------------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
