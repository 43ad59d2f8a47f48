"""Experiment runner: training arms, variant comparisons, sweeps, benchmarks.

Every run is a pure function of its :class:`ExperimentConfig`. Wall-clock
timing is the only nondeterministic quantity and is written as ``0.0``
unless ``record_time`` is set, so metric CSVs are byte-reproducible.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np
from scipy import stats

from lser.agent import DDPGAgent, OUNoise
from lser.baselines import PerBuffer, UniformBuffer
from lser.env import EnvConfig, RecEnv, episode_ctr
from lser.errors import InvalidConfigError
from lser.lsh import encode_bits, new_hyperplanes
from lser.replay import LserBuffer, Transition

VARIANTS = ("lser", "lser_p", "lser_s", "uniform", "per")
LSER_VARIANTS = ("lser", "lser_p", "lser_s")
METRIC_FIELDS = ("variant", "seed", "episode", "ctr", "cum_reward", "buffer_size", "wallclock_ms")
EPSILON_VALUES = (0.0, 0.9, 0.99, 1.0)
HYPERPLANE_VALUES = (4, 8, 12, 16, 20, 32)
INTERVENTION_WINDOW = 20


@dataclass
class ExperimentConfig:
    variant: str = "lser"
    episodes: int = 1000
    buffer_capacity: int = 10_000
    n_h: int = 8
    eps_max: float = 0.99
    batch_size: int = 64
    gamma: float = 0.99
    tau: float = 0.001
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    hidden: int = 128
    warmup: int | None = None
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    per_alpha: float = 0.6
    per_beta: float = 0.4
    intervention_T_r: float | None = None
    record_time: bool = False
    seed: int = 0
    env: EnvConfig = field(default_factory=EnvConfig)

    def validate(self) -> "ExperimentConfig":
        if self.variant not in VARIANTS:
            raise InvalidConfigError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.episodes < 0:
            raise InvalidConfigError("episodes must be >= 0")
        if self.buffer_capacity < 1 or self.batch_size < 1 or self.hidden < 1:
            raise InvalidConfigError("buffer_capacity, batch_size and hidden must be >= 1")
        if self.variant in LSER_VARIANTS:
            if self.n_h < 1:
                raise InvalidConfigError(f"n_h must be >= 1, got {self.n_h}")
            if not 0.0 <= self.eps_max <= 1.0:
                raise InvalidConfigError(f"eps_max must lie in [0, 1], got {self.eps_max}")
        if not 0.0 <= self.gamma <= 1.0 or not 0.0 < self.tau <= 1.0:
            raise InvalidConfigError("need gamma in [0, 1] and tau in (0, 1]")
        if self.warmup is not None and self.warmup < 0:
            raise InvalidConfigError("warmup must be >= 0")
        return self

    def seeded(self, seed: int) -> "ExperimentConfig":
        """Copy with both the agent-side and the environment seed set to ``seed``."""
        return dataclasses.replace(self, seed=seed, env=dataclasses.replace(self.env, seed=seed))

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            if f.name == "env":
                continue
            lines.append(f"{f.name}={_fmt(getattr(self, f.name))}")
        for f in dataclasses.fields(self.env):
            lines.append(f"env.{f.name}={_fmt(getattr(self.env, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        """Parse flat ``key=value`` lines; ``#`` starts a comment. Unset keys keep ``base``'s values."""
        base = base or cls()
        top: dict = {}
        env: dict = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidConfigError(f"line {lineno}: expected key=value, got {raw!r}")
            key, value = (p.strip() for p in line.split("=", 1))
            key = key.replace("-", "_")
            if key.startswith("env."):
                env[key[4:]] = value
            else:
                top[key] = value
        return base.updated(top, env)

    def updated(self, top: dict, env: dict | None = None) -> "ExperimentConfig":
        """Copy with fields replaced from string (or already typed) values."""
        top_types = {f.name: f.type for f in dataclasses.fields(self) if f.name != "env"}
        env_types = {f.name: f.type for f in dataclasses.fields(self.env)}
        kwargs = {}
        for k, v in top.items():
            if k not in top_types:
                raise InvalidConfigError(f"unknown config key {k!r}")
            kwargs[k] = _parse(v, top_types[k], k)
        env_kwargs = {}
        for k, v in (env or {}).items():
            if k not in env_types:
                raise InvalidConfigError(f"unknown config key 'env.{k}'")
            env_kwargs[k] = _parse(v, env_types[k], f"env.{k}")
        return dataclasses.replace(self, env=dataclasses.replace(self.env, **env_kwargs), **kwargs)


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(value, type_name, key: str):
    if not isinstance(value, str):
        return value
    t = str(type_name).replace(" ", "")
    optional = "None" in t
    if optional and value.lower() in ("none", ""):
        return None
    try:
        if t.startswith("int"):
            return int(value)
        if t.startswith("float"):
            return float(value)
        if t == "bool":
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
    except ValueError:
        raise InvalidConfigError(f"bad value for {key}: {value!r}") from None
    return value


@dataclass
class EpisodeMetrics:
    episode: int
    ctr: float
    cum_reward: float
    buffer_size: int
    wallclock_ms: float
    variant: str
    seed: int

    def row(self) -> list[str]:
        return [
            self.variant,
            str(self.seed),
            str(self.episode),
            repr(float(self.ctr)),
            repr(float(self.cum_reward)),
            str(self.buffer_size),
            repr(float(self.wallclock_ms)),
        ]


@dataclass
class ArmResult:
    config: ExperimentConfig
    metrics: list[EpisodeMetrics]
    buffer: object
    agent: DDPGAgent
    fingerprints: list[bytes]
    noise_disabled_at: int | None = None


def _sub_seeds(seed: int) -> tuple[int, ...]:
    return tuple(int(x) for x in np.random.SeedSequence(seed).generate_state(4))


def make_buffer(cfg: ExperimentConfig, d_s: int, seed: int):
    if cfg.variant == "uniform":
        return UniformBuffer(cfg.buffer_capacity, seed=seed)
    if cfg.variant == "per":
        return PerBuffer(cfg.buffer_capacity, alpha=cfg.per_alpha, beta=cfg.per_beta, seed=seed)
    store = "fifo" if cfg.variant == "lser_p" else "reward"
    sampling = "uniform" if cfg.variant == "lser_s" else "lsh"
    hp = new_hyperplanes(cfg.n_h, d_s, seed)
    return LserBuffer(cfg.buffer_capacity, hp, eps_max=cfg.eps_max, store=store, sampling=sampling, seed=seed)


def run_arm(cfg: ExperimentConfig) -> ArmResult:
    """Train one agent for ``cfg.episodes`` episodes; one metrics row per episode."""
    cfg.validate()
    env = RecEnv(cfg.env)
    d_s, d_a = cfg.env.d_s, cfg.env.d_a
    agent_seed, buffer_seed, noise_seed, _ = _sub_seeds(cfg.seed)
    agent = DDPGAgent(d_s, d_a, cfg.hidden, cfg.gamma, cfg.tau, cfg.actor_lr, cfg.critic_lr, seed=agent_seed)
    buffer = make_buffer(cfg, d_s, buffer_seed)
    noise = OUNoise(d_a, theta=cfg.ou_theta, sigma=cfg.ou_sigma, seed=noise_seed)
    explore = True
    recent: deque[float] = deque(maxlen=INTERVENTION_WINDOW)
    metrics: list[EpisodeMetrics] = []
    fingerprints: list[bytes] = []
    disabled_at = None
    for ep in range(cfg.episodes):
        t0 = time.perf_counter()
        state = env.reset(ep)
        fingerprints.append(env.user.interest.tobytes())
        noise.reset()
        rewards: list[int] = []
        done = False
        while not done:
            info = agent.train_step(buffer, env, state, noise if explore else None, cfg.batch_size, cfg.warmup)
            rewards.append(info.reward)
            state, done = info.next_state, info.done
        ctr = episode_ctr(rewards)
        cum = float(sum(cfg.gamma**k * r for k, r in enumerate(rewards)))
        ms = (time.perf_counter() - t0) * 1000.0 if cfg.record_time else 0.0
        metrics.append(EpisodeMetrics(ep, ctr, cum, len(buffer), ms, cfg.variant, cfg.seed))
        recent.append(ctr)
        if (
            explore
            and cfg.intervention_T_r is not None
            and len(recent) == INTERVENTION_WINDOW
            and sum(recent) / INTERVENTION_WINDOW > cfg.intervention_T_r
        ):
            explore = False
            disabled_at = ep
    return ArmResult(cfg, metrics, buffer, agent, fingerprints, disabled_at)


def run_training(cfg: ExperimentConfig) -> list[EpisodeMetrics]:
    return run_arm(cfg).metrics


def _run_arms(cfgs: Sequence[ExperimentConfig], workers: int = 1) -> list[ArmResult]:
    if workers <= 1 or len(cfgs) <= 1:
        return [run_arm(c) for c in cfgs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_arm, cfgs))


def run_variant_comparison(
    base: ExperimentConfig, variants: Iterable[str], seeds: Iterable[int], workers: int = 1
) -> list[ArmResult]:
    """Every variant at every seed; arms with the same seed face identical users."""
    variants, seeds = list(variants), list(seeds)
    if not seeds:
        raise InvalidConfigError("need at least one seed")
    for v in variants:
        if v not in VARIANTS:
            raise InvalidConfigError(f"unknown variant {v!r}")
    cfgs = [dataclasses.replace(base, variant=v).seeded(s) for v in variants for s in seeds]
    return _run_arms(cfgs, workers)


def random_policy_ctr(env_cfg: EnvConfig, episodes: int = 1000, seed: int = 0) -> float:
    """Mean per-episode CTR of actions drawn uniformly from [-1, 1]^d_a."""
    env = RecEnv(env_cfg)
    rng = np.random.default_rng(seed)
    ctrs = []
    for ep in range(episodes):
        env.reset(ep)
        rewards = []
        while not env.done:
            rewards.append(env.step(rng.uniform(-1.0, 1.0, env_cfg.d_a)).reward)
        ctrs.append(episode_ctr(rewards))
    return float(np.mean(ctrs))


def final_window_ctr(metrics: Sequence[EpisodeMetrics], window: int = 100) -> float:
    tail = metrics[-window:]
    return float(np.mean([m.ctr for m in tail])) if tail else float("nan")


def mean_ci95(values: Sequence[float]) -> tuple[float, float]:
    """Mean and t-based 95% half-width (0 for a single value)."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        return float(x.mean()), 0.0
    half = stats.t.ppf(0.975, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size)
    return float(x.mean()), float(half)


SUMMARY_FIELDS = ("arm", "n_h", "eps_max", "seeds", "final_ctr_mean", "final_ctr_ci95", "bucket_count_max", "sample_calls", "greedy_calls", "nearest_calls")


def summarize(arms: Sequence[ArmResult], key, window: int = 100) -> list[dict]:
    """Group arms by ``key(arm)`` and report final-window CTR with a 95% CI."""
    groups: dict = {}
    for arm in arms:
        groups.setdefault(key(arm), []).append(arm)
    rows = []
    for label, members in groups.items():
        mean, half = mean_ci95([final_window_ctr(a.metrics, window) for a in members])
        bufs = [a.buffer for a in members]
        rows.append(
            {
                "arm": label,
                "n_h": members[0].config.n_h,
                "eps_max": members[0].config.eps_max,
                "seeds": len(members),
                "final_ctr_mean": mean,
                "final_ctr_ci95": half,
                "bucket_count_max": max(getattr(b, "bucket_count", 0) for b in bufs),
                "sample_calls": sum(b.sample_calls for b in bufs),
                "greedy_calls": sum(getattr(b, "greedy_calls", 0) for b in bufs),
                "nearest_calls": sum(getattr(b, "nearest_calls", 0) for b in bufs),
            }
        )
    return rows


def run_hyperplane_sweep(
    base: ExperimentConfig, values: Iterable[int] = HYPERPLANE_VALUES, seeds: Iterable[int] = (0,), workers: int = 1
) -> tuple[list[dict], list[ArmResult]]:
    values = list(values)
    if not values:
        raise InvalidConfigError("need at least one n_h value")
    variant = base.variant if base.variant in LSER_VARIANTS else "lser"
    cfgs = [dataclasses.replace(base, variant=variant, n_h=n).seeded(s) for n in values for s in seeds]
    arms = _run_arms(cfgs, workers)
    return summarize(arms, key=lambda a: f"{variant}_nh{a.config.n_h}"), arms


def run_epsilon_sweep(
    base: ExperimentConfig, values: Iterable[float] = EPSILON_VALUES, seeds: Iterable[int] = (0,), workers: int = 1
) -> tuple[list[dict], list[ArmResult]]:
    variant = base.variant if base.variant in LSER_VARIANTS else "lser"
    cfgs = [dataclasses.replace(base, variant=variant, eps_max=float(e)).seeded(s) for e in values for s in seeds]
    arms = _run_arms(cfgs, workers)
    return summarize(arms, key=lambda a: f"{variant}_eps{a.config.eps_max!r}"), arms


def write_metrics_csv(arms_or_rows, f: IO[str]) -> None:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(METRIC_FIELDS)
    for item in arms_or_rows:
        rows = item.metrics if isinstance(item, ArmResult) else [item]
        for m in rows:
            w.writerow(m.row())


def write_dict_csv(rows: Sequence[dict], f: IO[str], fieldnames: Sequence[str] | None = None) -> None:
    fieldnames = list(fieldnames or (rows[0].keys() if rows else []))
    w = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def metrics_csv_text(arms) -> str:
    buf = io.StringIO()
    write_metrics_csv(arms, buf)
    return buf.getvalue()


# --- micro-benchmarks -------------------------------------------------------

BENCH_FIELDS = ("buffer", "size", "op", "median_ns", "ops", "bucket_count")


def _bucketed_states(n_buckets: int, bucket_size: int, hp, rng) -> list[list[np.ndarray]]:
    """States grouped into ``n_buckets`` distinct hash buckets of ``bucket_size`` each."""
    groups: dict[str, list[np.ndarray]] = {}
    while len(groups) < n_buckets:
        base = rng.standard_normal(hp.d_s)
        bits = encode_bits(hp, base)
        code = bits.tobytes()
        if code in groups:
            continue
        members = []
        while len(members) < bucket_size:
            s = base + 1e-9 * rng.standard_normal(hp.d_s)
            if np.array_equal(encode_bits(hp, s), bits):
                members.append(s)
        groups[code] = members
    return list(groups.values())


def _timed(fn, args_iter) -> list[int]:
    out = []
    clock = time.perf_counter_ns
    for args in args_iter:
        t0 = clock()
        fn(*args)
        out.append(clock() - t0)
    return out


def bench_buffers(
    sizes: Sequence[int] = (6_400, 64_000),
    bucket_size: int = 64,
    batch_size: int = 32,
    ops: int = 10_000,
    n_h: int = 20,
    d_s: int = 9,
    kinds: Sequence[str] = ("lser", "uniform", "per"),
    seed: int = 0,
) -> list[dict]:
    """Median per-push and per-sample latency for each buffer kind and total size.

    LSER buffers are filled with ``size // bucket_size`` buckets of exactly
    ``bucket_size`` transitions, so growing the total size only adds buckets.
    Sample queries are states of occupied buckets.
    """
    if list(sizes) != sorted(sizes):
        raise InvalidConfigError("sizes must be ascending")
    rows = []
    action = np.zeros(2)
    for size in sizes:
        rng = np.random.default_rng([seed, size])
        hp = new_hyperplanes(n_h, d_s, seed)
        groups = _bucketed_states(max(1, size // bucket_size), bucket_size, hp, rng)
        states = [s for g in groups for s in g]
        rewards = rng.random(len(states))
        transitions = [Transition(s, action, False, s, float(r)) for s, r in zip(states, rewards)]
        order = rng.permutation(len(transitions))
        queries = [groups[i][0] for i in rng.integers(0, len(groups), ops)]
        for kind in kinds:
            if kind == "lser":
                buf = LserBuffer(len(transitions), hp, eps_max=0.5, seed=seed)
            elif kind == "uniform":
                buf = UniformBuffer(len(transitions), seed=seed)
            elif kind == "per":
                buf = PerBuffer(len(transitions), seed=seed)
            else:
                raise InvalidConfigError(f"unknown buffer kind {kind!r}")
            push_ns = _timed(buf.push, ((transitions[i],) for i in order))
            sample_ns = _timed(buf.sample, ((batch_size, q) for q in queries))
            bc = getattr(buf, "bucket_count", 0)
            rows.append(dict(buffer=kind, size=len(transitions), op="push", median_ns=float(np.median(push_ns)), ops=len(push_ns), bucket_count=bc))
            rows.append(dict(buffer=kind, size=len(transitions), op="sample", median_ns=float(np.median(sample_ns)), ops=len(sample_ns), bucket_count=bc))
    return rows


# --- hash validation --------------------------------------------------------

VALIDATE_ANGLES = (0.0, math.pi / 6, math.pi / 3, math.pi / 2, 2 * math.pi / 3)
VALIDATE_FIELDS = ("theta", "trials", "empirical", "expected", "deviation", "ok")


def validate_lsh(trials: int = 10_000, angles: Iterable[float] = VALIDATE_ANGLES, d: int = 8, seed: int = 0, tol: float = 0.02):
    """Empirical per-bit collision rate of vector pairs at fixed angles.

    Each of the ``trials`` rows of one hyperplane set is an independent
    single-plane hash. Returns ``(rows, all_ok)``.
    """
    if trials < 1000:
        raise InvalidConfigError(f"need at least 1000 trials, got {trials}")
    if d < 2:
        raise InvalidConfigError("need d >= 2 to place two vectors at an angle")
    rows = []
    for k, theta in enumerate(angles):
        hp = new_hyperplanes(trials, d, np.random.SeedSequence([seed, k]).generate_state(1)[0])
        u = np.zeros(d)
        u[0] = 1.0
        v = np.zeros(d)
        v[0], v[1] = math.cos(theta), math.sin(theta)
        empirical = float(np.mean(encode_bits(hp, u) == encode_bits(hp, v)))
        expected = 1.0 - theta / math.pi
        dev = abs(empirical - expected)
        rows.append(dict(theta=float(theta), trials=trials, empirical=empirical, expected=expected, deviation=dev, ok=dev <= tol))
    return rows, all(r["ok"] for r in rows)
