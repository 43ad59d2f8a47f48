import numpy as np
import pytest

from lser.replay import Transition


def make_transition(state, reward, action=None, done=False, episode=-1):
    state = np.asarray(state, dtype=np.float64)
    action = np.zeros(2) if action is None else np.asarray(action, dtype=np.float64)
    return Transition(state, action, done, state.copy(), float(reward), episode)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
