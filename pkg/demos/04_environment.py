"""
The synthetic click environment
===============================

A user has a unit interest vector that drifts slowly around a fixed core.  A
recommendation is a direction; the click probability is logistic(kappa * cos)
between the two.  Episodes end after max_steps or after `patience` misses.
"""

import numpy as np

from lser import EnvConfig, RecEnv, episode_ctr
from lser.harness import random_policy_ctr

cfg = EnvConfig(seed=3)
env = RecEnv(cfg)
print("state dimension", cfg.d_s, "action dimension", cfg.d_a)

# An oracle that recommends the current interest vector clicks almost always.
ctrs = []
for ep in range(200):
    env.reset(ep)
    rewards = []
    while not env.done:
        rewards.append(env.step(env.user.interest.copy()).reward)
    ctrs.append(episode_ctr(rewards))
print(f"oracle CTR  {np.mean(ctrs):.3f}")

# Random directions hover near logistic(0) = 0.5, a little lower because bad
# streaks end episodes early.
print(f"random CTR  {random_policy_ctr(cfg, episodes=200, seed=3):.3f}")
