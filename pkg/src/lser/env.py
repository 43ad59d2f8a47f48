"""Synthetic online-recommendation environment with drifting user interest.

A user is a unit interest vector that random-walks around a fixed static
core. The agent recommends a direction in the same space and the user clicks
with probability ``logistic(kappa * cos(interest, action))``. The episode
ends after ``max_steps`` recommendations or ``patience`` misses in a row.

Randomness is split into per-episode streams keyed on ``(seed, episode)``:
users and their drift come from one stream, click draws and observation
noise from others. Two agents run on the same seed therefore face identical
users and drift realizations whatever actions they take.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from lser.errors import InvalidConfigError, ShapeError

_USER, _CLICK, _OBS = 0, 1, 2


class EpisodeFinishedError(RuntimeError):
    pass


@dataclass
class EnvConfig:
    d_u: int = 8
    kappa: float = 5.0
    eta: float = 0.05
    max_steps: int = 10
    patience: int = 3
    obs_noise: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        if self.d_u < 1:
            raise InvalidConfigError(f"d_u must be >= 1, got {self.d_u}")
        if self.kappa <= 0:
            raise InvalidConfigError(f"kappa must be > 0, got {self.kappa}")
        if self.eta < 0:
            raise InvalidConfigError(f"eta must be >= 0, got {self.eta}")
        if self.max_steps < 1 or self.patience < 1:
            raise InvalidConfigError("max_steps and patience must be >= 1")
        if self.obs_noise < 0:
            raise InvalidConfigError(f"obs_noise must be >= 0, got {self.obs_noise}")

    @property
    def d_a(self) -> int:
        return self.d_u

    @property
    def d_s(self) -> int:
        return self.d_u + 1

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class UserState:
    interest: np.ndarray
    static_core: np.ndarray
    step: int = 0
    misses: int = 0


@dataclass
class StepResult:
    next_state: np.ndarray
    reward: int
    done: bool
    click_prob: float


def logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


class RecEnv:
    def __init__(self, config: EnvConfig | None = None) -> None:
        self.config = config or EnvConfig()
        self.episode = -1
        self.user: UserState | None = None
        self.done = True

    def _streams(self, episode: int) -> tuple[np.random.Generator, ...]:
        seed = self.config.seed
        return tuple(np.random.default_rng([seed, episode, k]) for k in (_USER, _CLICK, _OBS))

    def reset(self, episode: int | None = None) -> np.ndarray:
        """Start the next episode (or episode ``episode``) and return its first observation."""
        self.episode = self.episode + 1 if episode is None else episode
        self._user_rng, self._click_rng, self._obs_rng = self._streams(self.episode)
        core = _unit(self._user_rng.standard_normal(self.config.d_u))
        self.user = UserState(core.copy(), core)
        self.done = False
        return self.observe()

    def observe(self) -> np.ndarray:
        cfg = self.config
        obs = self.user.interest
        if cfg.obs_noise > 0:
            obs = obs + cfg.obs_noise * self._obs_rng.standard_normal(cfg.d_u)
        return np.append(obs, self.user.step / cfg.max_steps)

    def click_prob(self, action) -> float:
        a = np.asarray(action, dtype=np.float64)
        if a.shape != (self.config.d_a,):
            raise ShapeError(f"expected an action of shape ({self.config.d_a},), got {a.shape}")
        norm = np.linalg.norm(a)
        if norm == 0.0:
            return 0.0
        return logistic(self.config.kappa * float(self.user.interest @ a) / norm)

    def step(self, action) -> StepResult:
        if self.done or self.user is None:
            raise EpisodeFinishedError("episode is over; call reset()")
        cfg = self.config
        u = self.user
        q = self.click_prob(action)
        # always consume one uniform so the click stream stays aligned across policies
        reward = int(self._click_rng.random() < q)
        u.misses = 0 if reward else u.misses + 1
        drift = self._user_rng.standard_normal(cfg.d_u)
        u.interest = _unit(u.interest + cfg.eta * drift + 0.1 * cfg.eta * (u.static_core - u.interest))
        u.step += 1
        self.done = u.step >= cfg.max_steps or u.misses >= cfg.patience
        return StepResult(self.observe(), reward, self.done, q)


def episode_ctr(rewards) -> float:
    rewards = list(rewards)
    if not rewards:
        raise ValueError("CTR of an empty episode is undefined")
    return sum(rewards) / len(rewards)
