import numpy as np
import pytest

from posemt import campaign


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def random_image(rng):
    return rng.integers(0, 256, size=(12, 16, 3), dtype=np.uint8)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Five synthetic fixtures with ground truth and masks."""
    root = tmp_path_factory.mktemp("fixtures_small")
    campaign.generate_synthetic_dataset(5, 11, root)
    return root


@pytest.fixture(scope="session")
def large_corpus(tmp_path_factory):
    """The 50-fixture corpus used by the end-to-end acceptance checks."""
    root = tmp_path_factory.mktemp("fixtures_large")
    campaign.generate_synthetic_dataset(50, 1234, root)
    return root
