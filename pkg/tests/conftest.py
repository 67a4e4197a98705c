import numpy as np
import pytest

from wgain.corpus import make_synthetic_corpus
from wgain.model import build_model, scaled_config
from wgain.seeding import named_stream


@pytest.fixture
def rng():
    return named_stream(1234, "tests")


@pytest.fixture(scope="session")
def tiny_configs():
    """Smallest config pair that still exercises every architectural path."""
    return scaled_config(32, scale=8)


@pytest.fixture
def tiny_model(tiny_configs):
    gen_cfg, crit_cfg = tiny_configs
    return build_model(gen_cfg, crit_cfg, seed=77)


@pytest.fixture(scope="session")
def small_corpus():
    return make_synthetic_corpus(8, 32, named_stream(99, "test-corpus"))


@pytest.fixture
def image32(small_corpus):
    return small_corpus[0]


def random_image(rng: np.random.Generator, side: int = 32) -> np.ndarray:
    return rng.random((side, side, 3)).astype(np.float32)
