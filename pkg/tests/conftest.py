"""Shared fixtures.

The expensive session fixtures (generated dataset, trained governor net) are
only built when a test actually requests them, so the fast unit modules stay
fast when run on their own.
"""

import numpy as np
import pytest

from kanshift.governor import ScenarioFamily, generate_dataset
from kanshift.losses import LOG_MSRELU, LossSpec
from kanshift.network import KanNetwork
from kanshift.rendezvous import Scenario
from kanshift.training import TrainConfig, train


def rel_err(a, b):
    """Relative error with a unit floor, elementwise against scalars/arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


@pytest.fixture(scope="session")
def default_scenario():
    return Scenario()


@pytest.fixture(scope="session")
def governor_spec():
    return LossSpec(mode=LOG_MSRELU, theta_c=2.0, reg_weight=1e-5)


@pytest.fixture(scope="session")
def governor_dataset():
    """2000 exact-governed samples from the default family (slow, ~3 min)."""
    return generate_dataset(ScenarioFamily(), 2000, seed=101)


@pytest.fixture(scope="session")
def trained_governor_net(governor_dataset, governor_spec):
    config = TrainConfig(epochs=400, batch_size=128, seed=5, lr=3e-3, weight_decay=1e-5, patience=60)
    net = KanNetwork.build([governor_dataset.features.shape[1], 8, 1], seed=5)
    train(net, governor_dataset.features, governor_dataset.t_star, governor_spec, config)
    return net
