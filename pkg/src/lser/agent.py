"""DDPG with hand-written numpy backpropagation.

Both networks are three-layer perceptrons (two ReLU hidden layers). The actor
ends in ``tanh`` so actions live in ``[-1, 1]``; the critic takes the
concatenation ``[state, action]`` and has a linear scalar output. Updates use
plain SGD.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from lser.errors import InvalidConfigError, ShapeError
from lser.replay import Transition


class Mlp:
    """Fully connected ReLU network, batch-first: ``y = act(relu(relu(x W0 + b0) W1 + b1) W2 + b2)``."""

    def __init__(self, sizes: Sequence[int], out_act: str = "linear", rng: np.random.Generator | None = None):
        if len(sizes) < 2 or any(n < 1 for n in sizes):
            raise InvalidConfigError(f"bad layer sizes {sizes}")
        if out_act not in ("linear", "tanh"):
            raise InvalidConfigError(f"unknown output activation {out_act!r}")
        self.sizes = tuple(int(n) for n in sizes)
        self.out_act = out_act
        rng = np.random.default_rng(0) if rng is None else rng
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.params.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.params.append(rng.uniform(-bound, bound, fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def copy(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.sizes = self.sizes
        other.out_act = self.out_act
        other.params = [p.copy() for p in self.params]
        return other

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ShapeError(f"expected input of shape (N, {self.sizes[0]}), got {x.shape}")
        acts = [x]
        h = x
        for k in range(self.n_layers):
            z = h @ self.params[2 * k] + self.params[2 * k + 1]
            if k < self.n_layers - 1:
                h = np.maximum(z, 0.0)
            elif self.out_act == "tanh":
                h = np.tanh(z)
            else:
                h = z
            acts.append(h)
        return h, acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, acts: list[np.ndarray], dy: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of a scalar loss given ``dy = dL/dy``; returns ``(param_grads, dL/dx)``."""
        grads: list[np.ndarray] = [None] * len(self.params)  # type: ignore[list-item]
        y = acts[-1]
        dz = dy * (1.0 - y * y) if self.out_act == "tanh" else dy
        for k in reversed(range(self.n_layers)):
            h_in = acts[k]
            grads[2 * k] = h_in.T @ dz
            grads[2 * k + 1] = dz.sum(axis=0)
            dh = dz @ self.params[2 * k].T
            if k > 0:
                # relu'(z) = 1 where the stored activation is positive
                dz = dh * (acts[k] > 0.0)
        return grads, dh


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """``target <- tau * online + (1 - tau) * target``, in place."""
    if target.sizes != online.sizes:
        raise ShapeError(f"network shapes differ: {target.sizes} vs {online.sizes}")
    for t, o in zip(target.params, online.params):
        t[...] = tau * o + (1.0 - tau) * t


class OUNoise:
    """Discretised Ornstein-Uhlenbeck process, ``x += theta (mu - x) dt + sigma sqrt(dt) N(0, 1)``."""

    def __init__(self, dim: int, theta: float = 0.15, sigma: float = 0.2, mu: float = 0.0, dt: float = 1.0, seed: int = 0):
        self.dim = dim
        self.theta = theta
        self.sigma = sigma
        self.mu = mu
        self.dt = dt
        self.rng = np.random.default_rng(seed)
        self.x = np.full(dim, mu, dtype=np.float64)

    def reset(self) -> None:
        self.x = np.full(self.dim, self.mu, dtype=np.float64)

    def step(self) -> np.ndarray:
        self.x = (
            self.x
            + self.theta * (self.mu - self.x) * self.dt
            + self.sigma * np.sqrt(self.dt) * self.rng.standard_normal(self.dim)
        )
        return self.x.copy()

    def stationary_variance(self) -> float:
        a = self.theta * self.dt
        return self.sigma**2 * self.dt / (2 * a - a * a)


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


def stack_batch(transitions: Sequence[Transition]) -> Batch:
    if not transitions:
        raise ValueError("batch is empty")
    return Batch(
        np.stack([t.state for t in transitions]).astype(np.float64),
        np.stack([t.action for t in transitions]).astype(np.float64),
        np.array([t.reward for t in transitions], dtype=np.float64),
        np.stack([t.next_state for t in transitions]).astype(np.float64),
        np.array([t.done for t in transitions], dtype=np.float64),
    )


@dataclass
class StepInfo:
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool
    updated: bool = False
    critic_loss: float | None = None
    actor_loss: float | None = None


class DDPGAgent:
    def __init__(
        self,
        d_s: int,
        d_a: int,
        hidden: int = 128,
        gamma: float = 0.99,
        tau: float = 0.001,
        actor_lr: float = 1e-4,
        critic_lr: float = 1e-3,
        seed: int = 0,
    ):
        if not 0.0 <= gamma <= 1.0:
            raise InvalidConfigError(f"gamma must lie in [0, 1], got {gamma}")
        if not 0.0 < tau <= 1.0:
            raise InvalidConfigError(f"tau must lie in (0, 1], got {tau}")
        self.d_s, self.d_a, self.hidden = d_s, d_a, hidden
        self.gamma, self.tau = gamma, tau
        self.actor_lr, self.critic_lr = actor_lr, critic_lr
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.actor = Mlp((d_s, hidden, hidden, d_a), "tanh", rng)
        self.critic = Mlp((d_s + d_a, hidden, hidden, 1), "linear", rng)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()

    def act(self, state) -> np.ndarray:
        s = np.asarray(state, dtype=np.float64).reshape(1, -1)
        return self.actor(s)[0]

    def q_value(self, state, action) -> float:
        x = np.concatenate([np.asarray(state, float), np.asarray(action, float)]).reshape(1, -1)
        return float(self.critic(x)[0, 0])

    def critic_targets(self, batch: Batch) -> np.ndarray:
        a2 = self.target_actor(batch.next_states)
        q2 = self.target_critic(np.hstack([batch.next_states, a2]))[:, 0]
        return batch.rewards + self.gamma * (1.0 - batch.dones) * q2

    def critic_loss_and_grads(self, batch: Batch, weights: np.ndarray | None = None):
        """Mean squared TD error against target-network bootstraps.

        Returns ``(loss, grads, td_errors)``; ``weights`` scales each sample's
        squared error (importance weights for prioritized replay).
        """
        n = batch.states.shape[0]
        if n == 0:
            raise ValueError("batch is empty")
        y = self.critic_targets(batch)
        q, acts = self.critic.forward(np.hstack([batch.states, batch.actions]))
        td = y - q[:, 0]
        w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
        loss = float(np.mean(w * td * td))
        dq = (-2.0 / n) * (w * td)[:, None]
        grads, _ = self.critic.backward(acts, dq)
        return loss, grads, td

    def actor_loss_and_grads(self, batch: Batch):
        """``-mean Q(s, actor(s))`` and its gradient w.r.t. the actor parameters."""
        n = batch.states.shape[0]
        if n == 0:
            raise ValueError("batch is empty")
        a, actor_acts = self.actor.forward(batch.states)
        q, critic_acts = self.critic.forward(np.hstack([batch.states, a]))
        loss = -float(q.mean())
        _, dx = self.critic.backward(critic_acts, np.full((n, 1), -1.0 / n))
        grads, _ = self.actor.backward(actor_acts, dx[:, self.d_s :])
        return loss, grads

    def update(self, batch: Batch, weights: np.ndarray | None = None) -> tuple[float, float, np.ndarray]:
        """One critic step, one actor step, then soft target updates."""
        c_loss, c_grads, td = self.critic_loss_and_grads(batch, weights)
        for p, g in zip(self.critic.params, c_grads):
            p -= self.critic_lr * g
        a_loss, a_grads = self.actor_loss_and_grads(batch)
        for p, g in zip(self.actor.params, a_grads):
            p -= self.actor_lr * g
        soft_update(self.target_critic, self.critic, self.tau)
        soft_update(self.target_actor, self.actor, self.tau)
        return c_loss, a_loss, td

    def train_step(self, buffer, env, state, noise: OUNoise | None = None, batch_size: int = 64, warmup: int | None = None) -> StepInfo:
        """Act in ``env``, learn from ``buffer``, then store the new transition.

        The replay query is the current state ``state``; buffers that do not
        condition on it ignore it. No update happens until the buffer holds
        ``warmup`` transitions (default ``10 * batch_size``).
        """
        warmup = 10 * batch_size if warmup is None else warmup
        a = self.act(state)
        if noise is not None:
            a = np.clip(a + noise.step(), -1.0, 1.0)
        res = env.step(a)
        info = StepInfo(a, res.reward, res.next_state, res.done)
        if len(buffer) >= max(warmup, 1):
            if hasattr(buffer, "sample_with_info"):
                ts, idx, w = buffer.sample_with_info(batch_size)
                info.critic_loss, info.actor_loss, td = self.update(stack_batch(ts), w)
                buffer.update_priorities(idx, td)
            else:
                ts = buffer.sample(batch_size, state=state)
                info.critic_loss, info.actor_loss, _ = self.update(stack_batch(ts))
            info.updated = True
        buffer.push(Transition(np.asarray(state, float), a, bool(res.done), res.next_state, float(res.reward), env.episode))
        return info

    def networks(self) -> dict[str, Mlp]:
        return {
            "actor": self.actor,
            "critic": self.critic,
            "target_actor": self.target_actor,
            "target_critic": self.target_critic,
        }


CHECKPOINT_MAGIC = "lser-checkpoint 1"


def save_checkpoint(agent: DDPGAgent, path, seeds: dict[str, int] | None = None) -> None:
    """Write ``agent`` as text: header, hyperparameters, seeds, then one
    ``param <net> <index> <shape...>`` line per array followed by its
    row-major values on a single line (``repr`` floats, exact round trip)."""
    lines = [
        CHECKPOINT_MAGIC,
        f"dims {agent.d_s} {agent.d_a} {agent.hidden}",
        f"hyper {agent.gamma!r} {agent.tau!r} {agent.actor_lr!r} {agent.critic_lr!r}",
        f"seed agent {agent.seed}",
    ]
    for name, value in sorted((seeds or {}).items()):
        lines.append(f"seed {name} {int(value)}")
    for net_name, net in agent.networks().items():
        for i, p in enumerate(net.params):
            lines.append(f"param {net_name} {i} " + " ".join(str(n) for n in p.shape))
            lines.append(" ".join(repr(float(v)) for v in p.ravel()))
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> tuple[DDPGAgent, dict[str, int]]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not an lser checkpoint")
    d_s, d_a, hidden = (int(v) for v in lines[1].split()[1:])
    gamma, tau, alr, clr = (float(v) for v in lines[2].split()[1:])
    seeds: dict[str, int] = {}
    i = 3
    while lines[i].startswith("seed "):
        _, name, value = lines[i].split()
        seeds[name] = int(value)
        i += 1
    agent = DDPGAgent(d_s, d_a, hidden, gamma, tau, alr, clr, seed=seeds.get("agent", 0))
    nets = agent.networks()
    while i < len(lines):
        _, net_name, idx, *shape = lines[i].split()
        values = np.array([float(v) for v in lines[i + 1].split()], dtype=np.float64)
        target = nets[net_name].params[int(idx)]
        if tuple(int(n) for n in shape) != target.shape:
            raise ShapeError(f"checkpoint shape {shape} does not match {target.shape}")
        target[...] = values.reshape(target.shape)
        i += 2
    return agent, seeds
