import numpy as np
import pytest

from sblq.data import BatchDataset, Trajectory


def make_dataset(n=6, horizon=3, d_s=4, d_a=3, n_actions=5, seed=0,
                 reward_bound=2.0, normalize=True):
    """Small valid dataset with Gaussian features and bounded rewards."""
    rng = np.random.default_rng(seed)
    table = rng.standard_normal((n_actions, d_a))
    trajectories = []
    for _ in range(n):
        states = rng.standard_normal((horizon, d_s))
        actions = rng.integers(0, n_actions, size=horizon)
        rewards = rng.uniform(-1.0, 1.0, size=horizon)
        trajectories.append(Trajectory(states, actions, rewards))
    return BatchDataset.from_trajectories(trajectories, table, reward_bound,
                                          normalize=normalize)


@pytest.fixture
def small_dataset():
    return make_dataset()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
