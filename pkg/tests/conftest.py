import numpy as np
import pytest

from cliplab.clipgen import GenConfig, generate_classes


@pytest.fixture(scope="session")
def clips10():
    return generate_classes(GenConfig(seed=0), 10)


@pytest.fixture(scope="session")
def clips100():
    return generate_classes(GenConfig(seed=0), 100)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
