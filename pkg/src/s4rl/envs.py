"""Desk-scale continuous-control environments with smooth state rewards.

Both environments are deterministic, vectorised over a leading batch axis,
and clip states into their box rather than terminating early. Rewards are
functions of the current state only.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core.rng import SeededRng
from .errors import ConfigurationError, NumericalError

log = logging.getLogger(__name__)

REFERENCE_EPISODES = 100
REFERENCE_SEED = 20210224


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_low: tuple[float, ...]
    state_high: tuple[float, ...]
    action_high: float
    action_dim: int
    gamma: float = 0.99
    max_steps: int = 100
    switch_groups: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if len(self.state_low) != len(self.state_high):
            raise ConfigurationError("state bounds differ in length")
        if any(lo >= hi for lo, hi in zip(self.state_low, self.state_high)):
            raise ConfigurationError(f"{self.name}: every lower bound must be below its upper bound")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.action_high <= 0 or self.action_dim < 1 or self.max_steps < 1:
            raise ConfigurationError(f"{self.name}: invalid action box or episode length")
        for a, b in self.switch_groups:
            if not (0 <= a < self.state_dim and 0 <= b < self.state_dim) or a == b:
                raise ConfigurationError(f"switch pair {(a, b)} out of range")

    @property
    def state_dim(self) -> int:
        return len(self.state_low)

    @property
    def low(self) -> np.ndarray:
        return np.asarray(self.state_low, dtype=np.float64)

    @property
    def high(self) -> np.ndarray:
        return np.asarray(self.state_high, dtype=np.float64)

    def to_dict(self) -> dict:
        return {
            "name": self.name, "state_low": list(self.state_low),
            "state_high": list(self.state_high), "action_high": self.action_high,
            "action_dim": self.action_dim, "gamma": self.gamma, "max_steps": self.max_steps,
            "switch_groups": [list(g) for g in self.switch_groups],
        }

    @classmethod
    def from_dict(cls, d: dict) -> EnvSpec:
        return cls(d["name"], tuple(d["state_low"]), tuple(d["state_high"]),
                   float(d["action_high"]), int(d["action_dim"]), float(d["gamma"]),
                   int(d["max_steps"]), tuple(tuple(g) for g in d.get("switch_groups", ())))


@dataclass
class EnvState:
    vector: np.ndarray
    t: int = 0


@dataclass(frozen=True)
class ReferenceScores:
    random: float
    expert: float

    def __post_init__(self):
        if not self.expert > self.random:
            raise ConfigurationError(
                f"expert reference {self.expert} must exceed random reference {self.random}")

    def normalize(self, raw):
        return 100.0 * (np.asarray(raw, dtype=np.float64) - self.random) / (self.expert - self.random)


class Env:
    """Base class: subclasses define ``spec``, ``init_low/init_high``, dynamics and reward."""

    spec: EnvSpec
    init_low: np.ndarray
    init_high: np.ndarray

    def __init__(self):
        self.clamp_count = 0

    # batch API ------------------------------------------------------------------

    def reset_batch(self, rng: SeededRng, n: int) -> np.ndarray:
        u = rng.uniform(0.0, 1.0, (n, self.spec.state_dim))
        return self._to_state(self.init_low + u * (self.init_high - self.init_low))

    def reward_batch(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def step_batch(self, states: np.ndarray, actions: np.ndarray):
        """Return ``(next_states, rewards)`` with ``rewards = r(states)``."""
        actions = np.asarray(actions, dtype=np.float64)
        if np.isnan(actions).any():
            raise NumericalError(f"{self.spec.name}: NaN action")
        hi = self.spec.action_high
        outside = np.abs(actions) > hi
        if outside.any():
            self.clamp_count += int(outside.sum())
            actions = np.clip(actions, -hi, hi)
        rewards = self.reward_batch(states)
        nxt = self._dynamics(states, actions)
        return np.clip(nxt, self.spec.low, self.spec.high), rewards

    def _dynamics(self, states, actions):
        raise NotImplementedError

    def _to_state(self, raw):
        return raw

    # single-state API -------------------------------------------------------------

    def reset(self, rng: SeededRng) -> EnvState:
        return EnvState(self.reset_batch(rng, 1)[0], 0)

    def step(self, state: EnvState, action):
        if state.t >= self.spec.max_steps:
            raise ConfigurationError("episode already finished")
        nxt, r = self.step_batch(state.vector[None, :], np.asarray(action, dtype=np.float64)[None, :])
        t = state.t + 1
        return EnvState(nxt[0], t), float(r[0]), t >= self.spec.max_steps

    # scripted policies --------------------------------------------------------------

    def expert_action(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def random_action(self, rng: SeededRng, n: int) -> np.ndarray:
        hi = self.spec.action_high
        return rng.uniform(-hi, hi, (n, self.spec.action_dim))


class PointMass2D(Env):
    """Damped double integrator in the plane; reward ``exp(-|p - goal|^2 / tau)``.

    State ``[px, py, vx, vy]``, action a force in ``[-1, 1]^2``. Semi-implicit
    Euler: ``v' = v + dt (gain a - damping v)``, ``p' = p + dt v'``.
    """

    def __init__(self, dt=0.1, gain=1.0, damping=1.0, goal=(2.0, 2.0), tau=2.0,
                 max_steps=100, gamma=0.99):
        super().__init__()
        self.dt, self.gain, self.damping, self.tau = dt, gain, damping, tau
        self.goal = np.asarray(goal, dtype=np.float64)
        self.spec = EnvSpec("pointmass2d", (-3.0, -3.0, -2.0, -2.0), (3.0, 3.0, 2.0, 2.0),
                            1.0, 2, gamma, max_steps, ((0, 1), (2, 3)))
        self.init_low = np.array([-0.1, -0.1, -0.1, -0.1])
        self.init_high = -self.init_low
        self.kp, self.kd = 2.0, 2.5

    def reward_batch(self, states):
        d = states[..., :2] - self.goal
        return np.exp(-np.sum(d * d, axis=-1) / self.tau)

    def _dynamics(self, states, actions):
        p, v = states[..., :2], states[..., 2:]
        v2 = v + self.dt * (self.gain * actions - self.damping * v)
        p2 = p + self.dt * v2
        return np.concatenate([p2, v2], axis=-1)

    def expert_action(self, states):
        p, v = states[..., :2], states[..., 2:]
        a = self.kp * (self.goal - p) - self.kd * v
        return np.clip(a, -1.0, 1.0)


class Pendulum(Env):
    """Torque-limited pendulum swing-up; ``theta = 0`` is upright.

    State ``[cos theta, sin theta, omega]``; the action in ``[-1, 1]`` is scaled
    to a torque of ``max_torque``. Reward ``exp(-((1 - cos) + 0.01 omega^2) / tau)``.
    """

    def __init__(self, dt=0.05, g=10.0, max_torque=2.0, max_speed=8.0, tau=2.0,
                 max_steps=200, gamma=0.99):
        super().__init__()
        self.dt, self.g, self.max_torque, self.max_speed, self.tau = dt, g, max_torque, max_speed, tau
        self.spec = EnvSpec("pendulum", (-1.0, -1.0, -max_speed), (1.0, 1.0, max_speed),
                            1.0, 1, gamma, max_steps, ((0, 1),))
        # initial (theta, omega) box, hanging down
        self.init_low = np.array([math.pi - 0.2, -0.2])
        self.init_high = np.array([math.pi + 0.2, 0.2])

    def reset_batch(self, rng, n):
        u = rng.uniform(0.0, 1.0, (n, 2))
        th_om = self.init_low + u * (self.init_high - self.init_low)
        return np.stack([np.cos(th_om[:, 0]), np.sin(th_om[:, 0]), th_om[:, 1]], axis=-1)

    def reward_batch(self, states):
        c, w = states[..., 0], states[..., 2]
        return np.exp(-((1.0 - c) + 0.01 * w * w) / self.tau)

    def _dynamics(self, states, actions):
        th = np.arctan2(states[..., 1], states[..., 0])
        w = states[..., 2]
        u = self.max_torque * actions[..., 0]
        w2 = np.clip(w + (1.5 * self.g * np.sin(th) + 3.0 * u) * self.dt,
                     -self.max_speed, self.max_speed)
        th2 = th + w2 * self.dt
        return np.stack([np.cos(th2), np.sin(th2), w2], axis=-1)

    def expert_action(self, states):
        c, s, w = states[..., 0], states[..., 1], states[..., 2]
        th = np.arctan2(s, c)
        # energy of the unforced system: 0.5 w^2 + 1.5 g cos(th); upright at rest = 1.5 g
        energy = 0.5 * w * w + 1.5 * self.g * c
        pump = np.sign(w + 1e-9) * 0.5 * (1.5 * self.g - energy)
        balance = -(8.0 * th + 1.5 * w) / self.max_torque
        u = np.where(c > 0.85, balance, pump)
        return np.clip(u, -1.0, 1.0)[..., None]


REGISTRY = {"pointmass2d": PointMass2D, "pendulum": Pendulum}


def make_env(name: str, **kwargs) -> Env:
    try:
        return REGISTRY[name](**kwargs)
    except KeyError:
        raise ConfigurationError(f"unknown environment {name!r}; have {sorted(REGISTRY)}") from None


def reset(env: Env, rng: SeededRng) -> EnvState:
    return env.reset(rng)


def step(env: Env, state: EnvState, action):
    return env.step(state, action)


def rollout_returns(env: Env, policy, rng: SeededRng, episodes: int) -> np.ndarray:
    """Undiscounted returns of ``policy(states, rng) -> actions`` over a batch of episodes."""
    states = env.reset_batch(rng.split("reset"), episodes)
    act_rng = rng.split("act")
    total = np.zeros(episodes)
    for _ in range(env.spec.max_steps):
        actions = policy(states, act_rng)
        states, r = env.step_batch(states, actions)
        total += r
    return total


def random_policy(env: Env):
    return lambda states, rng: env.random_action(rng, states.shape[0])


def expert_policy(env: Env):
    return lambda states, rng: env.expert_action(states)


@functools.lru_cache(maxsize=None)
def _reference(name: str, episodes: int, seed: int) -> ReferenceScores:
    env = make_env(name)
    rng = SeededRng(seed).split(f"reference/{name}")
    rnd = rollout_returns(env, random_policy(env), rng.split("random"), episodes).mean()
    exp = rollout_returns(env, expert_policy(env), rng.split("expert"), episodes).mean()
    return ReferenceScores(float(rnd), float(exp))


def reference_scores(env: Env | str, episodes: int = REFERENCE_EPISODES,
                     seed: int = REFERENCE_SEED) -> ReferenceScores:
    """Mean episode returns of the uniform-random and scripted-expert policies."""
    name = env if isinstance(env, str) else env.spec.name
    return _reference(name, int(episodes), int(seed))
