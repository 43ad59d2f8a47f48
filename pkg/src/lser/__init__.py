"""Locality-sensitive experience replay for DDPG-based online recommendation."""

from lser.lsh import (
    HyperplaneSet,
    angular_collision_prob,
    encode,
    jaccard,
    nearest_codes,
    new_hyperplanes,
)
from lser.replay import EmptyBufferError, LserBuffer, Transition
from lser.baselines import PerBuffer, SumTree, UniformBuffer
from lser.agent import DDPGAgent, Mlp, OUNoise
from lser.env import EnvConfig, EpisodeFinishedError, RecEnv, episode_ctr

__all__ = [
    "HyperplaneSet",
    "angular_collision_prob",
    "encode",
    "jaccard",
    "nearest_codes",
    "new_hyperplanes",
    "EmptyBufferError",
    "LserBuffer",
    "Transition",
    "PerBuffer",
    "SumTree",
    "UniformBuffer",
    "DDPGAgent",
    "Mlp",
    "OUNoise",
    "EnvConfig",
    "EpisodeFinishedError",
    "RecEnv",
    "episode_ctr",
]

__version__ = "0.1.0"
