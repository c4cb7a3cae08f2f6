import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from spiketag.data import split_validation
from spiketag.layers import NetworkConfig, init_network
from spiketag.toygen import generate_corpus, generate_embeddings

TOY_SEED = 11


@pytest.fixture(scope="session")
def toy_corpus():
    return generate_corpus(200, seed=TOY_SEED)


@pytest.fixture(scope="session")
def toy_table():
    return generate_embeddings(16, seed=TOY_SEED)


@pytest.fixture(scope="session")
def toy_split(toy_corpus):
    return split_validation(toy_corpus, 40, seed=0)


@pytest.fixture
def small_net_cfg():
    return NetworkConfig(
        time_steps=4, channels=3, kernel=3, n_spiking_conv=2, embedding_dim=5,
        spike_mode="ternary",
    )


@pytest.fixture
def small_net(small_net_cfg):
    rng = np.random.default_rng(42)
    return init_network(small_net_cfg, rng, dtype=np.float32)
