"""Offline dataset container, collection, subsampling and minibatch sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from ..core.rng import SeededRng
from ..envs import Env, EnvSpec
from ..errors import ConfigurationError

SPLIT_KINDS = ("random", "medium", "medium-replay", "medium-expert")


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    @property
    def size(self) -> int:
        return self.rewards.shape[0]

    def transitions(self) -> list[Transition]:
        return [Transition(self.states[i], self.actions[i], float(self.rewards[i]),
                           self.next_states[i], bool(self.dones[i])) for i in range(self.size)]


@dataclass
class OfflineDataset:
    """Transitions stored column-wise, in collection order.

    ``episode_starts`` holds the index of the first transition of every
    episode; ``dones`` marks true terminals only (time-limit ends are
    episode boundaries, not terminals).
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    spec: EnvSpec
    split: str = "custom"
    behavior: str = ""
    seed: int = 0
    episode_starts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n, d, ad = len(self.rewards), self.spec.state_dim, self.spec.action_dim
        self.states = np.asarray(self.states, dtype=np.float64).reshape(n, d)
        self.next_states = np.asarray(self.next_states, dtype=np.float64).reshape(n, d)
        self.actions = np.asarray(self.actions, dtype=np.float64).reshape(n, ad)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        self.dones = np.asarray(self.dones, dtype=np.float64)
        self.episode_starts = np.asarray(self.episode_starts, dtype=np.int64)
        if self.dones.shape != (n,):
            raise ConfigurationError("dones must have one entry per transition")
        es = self.episode_starts
        if n and (len(es) == 0 or es[0] != 0 or np.any(np.diff(es) <= 0) or es[-1] >= n):
            raise ConfigurationError("episode_starts must be strictly increasing from 0 and below N")
        if not n and len(es):
            raise ConfigurationError("empty dataset cannot have episodes")
        if not np.isfinite(self.rewards).all():
            raise ConfigurationError("rewards must be finite")

    def __len__(self) -> int:
        return len(self.rewards)

    def __getitem__(self, i) -> Transition:
        return Transition(self.states[i], self.actions[i], float(self.rewards[i]),
                          self.next_states[i], bool(self.dones[i]))

    @property
    def n_episodes(self) -> int:
        return len(self.episode_starts)

    def episode_slices(self) -> list[slice]:
        ends = list(self.episode_starts[1:]) + [len(self)]
        return [slice(int(a), int(b)) for a, b in zip(self.episode_starts, ends)]

    def episode_returns(self) -> np.ndarray:
        return np.array([self.rewards[s].sum() for s in self.episode_slices()])

    def chain_consistent(self) -> bool:
        """Within each episode, every next state equals the following state exactly."""
        if len(self) < 2:
            return True
        link = np.all(self.next_states[:-1] == self.states[1:], axis=1)
        link[self.episode_starts[1:] - 1] = True
        return bool(link.all())

    def in_bounds(self) -> bool:
        lo, hi = self.spec.low, self.spec.high
        return bool(np.all((self.states >= lo) & (self.states <= hi))
                    and np.all((self.next_states >= lo) & (self.next_states <= hi)))

    def sample_batch(self, batch_size: int, rng: SeededRng) -> Batch:
        return sample_batch(self, batch_size, rng)

    def take(self, idx, episode_starts, **meta) -> OfflineDataset:
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, states=self.states[idx], actions=self.actions[idx],
                       rewards=self.rewards[idx], next_states=self.next_states[idx],
                       dones=self.dones[idx], episode_starts=episode_starts, **meta)

    def summary(self) -> dict:
        rets = self.episode_returns()
        return {
            "env": self.spec.name, "split": self.split, "behavior": self.behavior,
            "seed": self.seed, "transitions": len(self), "episodes": self.n_episodes,
            "reward_mean": float(self.rewards.mean()) if len(self) else float("nan"),
            "return_mean": float(rets.mean()) if len(rets) else float("nan"),
            "return_min": float(rets.min()) if len(rets) else float("nan"),
            "return_max": float(rets.max()) if len(rets) else float("nan"),
            "provenance": self.provenance,
        }


def empty_dataset(spec: EnvSpec, **meta) -> OfflineDataset:
    d, ad = spec.state_dim, spec.action_dim
    return OfflineDataset(np.zeros((0, d)), np.zeros((0, ad)), np.zeros(0), np.zeros((0, d)),
                          np.zeros(0), spec, **meta)


def concat(parts: list[OfflineDataset], **meta) -> OfflineDataset:
    """Join datasets end to end; episode boundaries are shifted accordingly."""
    if not parts:
        raise ConfigurationError("concat needs at least one dataset")
    offsets = np.cumsum([0] + [len(p) for p in parts[:-1]])
    starts = np.concatenate([p.episode_starts + o for p, o in zip(parts, offsets)])
    cat = lambda name: np.concatenate([getattr(p, name) for p in parts])
    return OfflineDataset(cat("states"), cat("actions"), cat("rewards"), cat("next_states"),
                          cat("dones"), parts[0].spec, episode_starts=starts, **meta)


def collect(env: Env, policy, episodes: int, rng: SeededRng, split: str = "custom",
            behavior: str = "") -> OfflineDataset:
    """Roll out ``policy(states, rng) -> actions`` for whole episodes, all in lockstep.

    Records are stored episode-major: episode 0's transitions first, and so on.
    """
    spec = env.spec
    meta = {"split": split, "behavior": behavior, "seed": int(rng.seed),
            "provenance": {"rng_path": list(rng.path), "episodes": int(episodes)}}
    if episodes == 0:
        return empty_dataset(spec, **meta)
    if episodes < 0:
        raise ConfigurationError("episodes must be >= 0")
    T = spec.max_steps
    s = env.reset_batch(rng.split("reset"), episodes)
    act_rng = rng.split("act")
    S = np.empty((T, episodes, spec.state_dim))
    A = np.empty((T, episodes, spec.action_dim))
    R = np.empty((T, episodes))
    S2 = np.empty_like(S)
    for t in range(T):
        a = np.asarray(policy(s, act_rng), dtype=np.float64)
        a = np.clip(a, -spec.action_high, spec.action_high)
        s2, r = env.step_batch(s, a)
        S[t], A[t], R[t], S2[t] = s, a, r, s2
        s = s2
    em = lambda x: np.swapaxes(x, 0, 1).reshape(episodes * T, *x.shape[2:])
    return OfflineDataset(em(S), em(A), em(R), em(S2), np.zeros(episodes * T), spec,
                          episode_starts=np.arange(episodes) * T, **meta)


def subsample(dataset: OfflineDataset, fraction: float, rng: SeededRng,
              per_episode: bool = False) -> OfflineDataset:
    """Keep ``ceil(fraction * N)`` transitions drawn uniformly without replacement.

    Order is preserved and a new episode boundary is placed wherever the kept
    records stop being consecutive, so chain consistency survives. With
    ``per_episode`` whole episodes are drawn instead (``ceil(fraction * E)``).
    """
    fraction = float(fraction)
    if not 0.0 < fraction <= 1.0 or math.isnan(fraction):
        raise ConfigurationError(f"subsample fraction must lie in (0, 1], got {fraction}")
    n = len(dataset)
    prov = dict(dataset.provenance)
    prov.update({"parent_seed": dataset.seed, "parent_split": dataset.split,
                 "parent_size": n, "fraction": fraction, "per_episode": per_episode,
                 "subsample_seed": int(rng.seed), "subsample_rng_path": list(rng.path)})
    if per_episode:
        sl = dataset.episode_slices()
        k = math.ceil(fraction * len(sl))
        chosen = np.sort(rng.choice(len(sl), size=k, replace=False)) if k else np.zeros(0, int)
        idx = np.concatenate([np.arange(sl[e].start, sl[e].stop) for e in chosen]) if k \
            else np.zeros(0, np.int64)
    else:
        k = math.ceil(fraction * n)
        idx = np.sort(rng.choice(n, size=k, replace=False)) if k else np.zeros(0, np.int64)
    if len(idx) == 0:
        starts = np.zeros(0, np.int64)
    else:
        is_start = np.zeros(n, bool)
        is_start[dataset.episode_starts] = True
        brk = np.ones(len(idx), bool)
        brk[1:] = (np.diff(idx) != 1) | is_start[idx[1:]]
        starts = np.flatnonzero(brk)
    return dataset.take(idx, starts, provenance=prov)


def sample_batch(dataset: OfflineDataset, batch_size: int, rng: SeededRng) -> Batch:
    """Uniform draws with replacement."""
    n = len(dataset)
    if n == 0:
        raise ConfigurationError("cannot sample from an empty dataset")
    if batch_size < 1:
        raise ConfigurationError("batch_size must be >= 1")
    i = rng.integers(0, n, batch_size)
    return Batch(dataset.states[i], dataset.actions[i], dataset.rewards[i],
                 dataset.next_states[i], dataset.dones[i])


def sample_transitions(dataset: OfflineDataset, batch_size: int, rng: SeededRng) -> list[Transition]:
    return sample_batch(dataset, batch_size, rng).transitions()


class ReplayBuffer:
    """Fixed-capacity FIFO buffer for online training; same sampling as datasets."""

    def __init__(self, spec: EnvSpec, capacity: int):
        self.spec = spec
        self.capacity = int(capacity)
        d, ad = spec.state_dim, spec.action_dim
        self.states = np.zeros((capacity, d))
        self.actions = np.zeros((capacity, ad))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, d))
        self.dones = np.zeros(capacity)
        self.size = 0
        self.ptr = 0

    def __len__(self):
        return self.size

    def add_batch(self, s, a, r, s2, d):
        for i in range(len(r)):
            j = self.ptr
            self.states[j], self.actions[j], self.rewards[j] = s[i], a[i], r[i]
            self.next_states[j], self.dones[j] = s2[i], d[i]
            self.ptr = (j + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)

    def sample_batch(self, batch_size: int, rng: SeededRng) -> Batch:
        if self.size == 0:
            raise ConfigurationError("cannot sample from an empty buffer")
        i = rng.integers(0, self.size, batch_size)
        return Batch(self.states[i], self.actions[i], self.rewards[i], self.next_states[i],
                     self.dones[i])
