"""D4RL-style split analogues built from scripted and online-trained behaviour policies."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core.rng import SeededRng
from ..envs import Env, expert_policy, make_env, random_policy, reference_scores, rollout_returns
from ..errors import ConfigurationError
from .core import SPLIT_KINDS, OfflineDataset, ReplayBuffer, collect, concat

log = logging.getLogger(__name__)

N_REPLAY_SNAPSHOTS = 10
MEDIUM_TARGET = 50.0


@dataclass
class BehaviorConfig:
    """Online SAC budget for producing partially trained behaviour policies."""

    steps: int = 12000
    warmup: int = 1000
    eval_every: int = 250
    eval_episodes: int = 10
    batch_size: int = 128
    hidden: tuple[int, ...] = (64, 64)

    @classmethod
    def for_env(cls, name: str) -> BehaviorConfig:
        # swing-up needs a longer online budget before reaching the medium band
        return cls(steps=BEHAVIOR_STEPS.get(name, cls.steps))


BEHAVIOR_STEPS = {"pointmass2d": 12000, "pendulum": 40000}


@dataclass
class Snapshot:
    step: int
    score: float
    policy: object


@dataclass
class BehaviorRun:
    env_name: str
    seed: int
    snapshots: list[Snapshot] = field(default_factory=list)

    def medium(self) -> Snapshot:
        """The snapshot whose normalised score is closest to the medium target."""
        return min(self.snapshots, key=lambda s: (abs(s.score - MEDIUM_TARGET), s.step))

    def replay_snapshots(self, n: int = N_REPLAY_SNAPSHOTS) -> list[Snapshot]:
        """``n`` evenly spaced snapshots from the untrained policy up to the medium one."""
        last = self.snapshots.index(self.medium())
        pick = np.unique(np.round(np.linspace(0, last, n)).astype(int))
        return [self.snapshots[i] for i in pick]


def policy_actor(policy, deterministic=False):
    from ..agent.policy import policy_sample
    return lambda states, rng: policy_sample(policy, states, rng, deterministic).action


def evaluate_policy(env: Env, policy, rng: SeededRng, episodes: int) -> float:
    ref = reference_scores(env)
    raw = rollout_returns(env, policy_actor(policy, True), rng, episodes)
    return float(ref.normalize(raw.mean()))


def train_behavior(env: Env, rng: SeededRng, cfg: BehaviorConfig | None = None) -> BehaviorRun:
    """Online SAC on ``env``; the policy is snapshotted at every evaluation point."""
    from ..agent import AgentConfig, CqlConfig, make_agent, train_step

    cfg = cfg or BehaviorConfig.for_env(env.spec.name)
    spec = env.spec
    agent = make_agent(spec, AgentConfig(algo="cql", hidden=cfg.hidden, batch_size=cfg.batch_size,
                                         cql=CqlConfig(weight=0.0)), rng.split("agent"))
    buf = ReplayBuffer(spec, cfg.steps)
    run = BehaviorRun(spec.name, int(rng.seed))
    act = policy_actor(agent.policy)
    env_rng = rng.split("env")
    state = env.reset_batch(env_rng.split("reset:0"), 1)
    t_ep, n_ep = 0, 0
    for t in range(cfg.steps + 1):
        if t % cfg.eval_every == 0:
            score = evaluate_policy(env, agent.policy, rng.split(f"eval:{t}"), cfg.eval_episodes)
            run.snapshots.append(Snapshot(t, score, agent.policy.copy()))
            log.debug("behaviour step %d score %.1f", t, score)
        if t == cfg.steps:
            break
        step_rng = rng.split(f"step:{t}")
        if t < cfg.warmup:
            a = env.random_action(step_rng, 1)
        else:
            a = act(state, step_rng.split("act"))
        nxt, r = env.step_batch(state, a)
        buf.add_batch(state, a, r, nxt, np.zeros(1))
        t_ep += 1
        state = nxt
        if t_ep == spec.max_steps:
            n_ep += 1
            t_ep = 0
            state = env.reset_batch(env_rng.split(f"reset:{n_ep}"), 1)
        if t >= cfg.warmup:
            train_step(agent, buf, step_rng)
    return run


def _cache_path(cache_dir, env_name: str, seed: int, cfg: BehaviorConfig) -> Path:
    tag = f"{cfg.steps}-{cfg.warmup}-{cfg.eval_every}-{cfg.eval_episodes}-{cfg.batch_size}-" \
          + "x".join(map(str, cfg.hidden))
    return Path(cache_dir) / f"behavior-{env_name}-{seed}-{tag}.npz"


def behavior_run(env: Env, rng: SeededRng, cfg: BehaviorConfig | None = None,
                 cache_dir=None) -> BehaviorRun:
    """``train_behavior`` with an optional on-disk cache of the snapshots."""
    from ..agent.policy import GaussianPolicy
    from ..core.net import load_checkpoint, save_checkpoint

    cfg = cfg or BehaviorConfig.for_env(env.spec.name)
    cache_dir = cache_dir or os.environ.get("S4RL_CACHE")
    path = _cache_path(cache_dir, env.spec.name, rng.seed, cfg) if cache_dir else None
    if path is not None and path.exists():
        nets, header, _ = load_checkpoint(path)
        snaps = [Snapshot(s["step"], s["score"], GaussianPolicy(nets[f"snap{i}"], env.spec.action_dim,
                                                                env.spec.action_high))
                 for i, s in enumerate(header["extra"]["snapshots"])]
        if header["extra"].get("rng_path") == list(rng.path):
            return BehaviorRun(env.spec.name, int(rng.seed), snaps)
    run = train_behavior(env, rng, cfg)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(path, {f"snap{i}": s.policy.net for i, s in enumerate(run.snapshots)},
                        rng.seed, {"snapshots": [{"step": s.step, "score": s.score} for s in run.snapshots],
                                   "rng_path": list(rng.path)})
    return run


def make_split(env: Env | str, kind: str, rng: SeededRng, transitions: int | None = None,
               behavior: BehaviorRun | None = None, behavior_cfg: BehaviorConfig | None = None,
               cache_dir=None) -> OfflineDataset:
    """Build a split of about ``transitions`` records (rounded up to whole episodes).

    random: uniform actions. medium: the behaviour snapshot nearest 50 normalised
    points. medium-replay: equal shares from evenly spaced snapshots of the
    behaviour run up to medium. medium-expert: half medium, half scripted expert.
    """
    env = make_env(env) if isinstance(env, str) else env
    if kind not in SPLIT_KINDS:
        raise ConfigurationError(f"unknown split kind {kind!r}; expected one of {SPLIT_KINDS}")
    T = env.spec.max_steps
    transitions = 100 * T if transitions is None else transitions
    episodes = max(1, math.ceil(transitions / T))
    data_rng = rng.split(f"data/{kind}")
    meta = {"split": kind}
    if kind == "random":
        return collect(env, random_policy(env), episodes, data_rng, behavior="uniform-random", **meta)
    if behavior is None:
        behavior = behavior_run(env, rng.split("behavior"), behavior_cfg, cache_dir)
    med = behavior.medium()
    if kind == "medium":
        ds = collect(env, policy_actor(med.policy), episodes, data_rng,
                     behavior=f"sac-snapshot step={med.step} score={med.score:.1f}", **meta)
    elif kind == "medium-expert":
        half = episodes // 2
        parts = [collect(env, policy_actor(med.policy), half, data_rng.split("medium")),
                 collect(env, expert_policy(env), episodes - half, data_rng.split("expert"))]
        ds = concat(parts, behavior=f"mix medium(step={med.step}) + scripted-expert",
                    seed=int(rng.seed), **meta)
        ds.provenance = {"medium_episodes": half, "expert_episodes": episodes - half}
    else:
        snaps = behavior.replay_snapshots()
        shares = np.diff(np.round(np.linspace(0, episodes, len(snaps) + 1)).astype(int))
        parts = [collect(env, policy_actor(s.policy), int(k), data_rng.split(f"snap{s.step}"))
                 for s, k in zip(snaps, shares) if k > 0]
        ds = concat(parts, behavior="sac-snapshots steps=" + ",".join(str(s.step) for s in snaps),
                    seed=int(rng.seed), **meta)
        ds.provenance = {"snapshot_steps": [s.step for s in snaps],
                         "snapshot_scores": [round(s.score, 3) for s in snaps],
                         "episodes_per_snapshot": [int(k) for k in shares]}
    ds.seed = int(rng.seed)
    ds.provenance.update({"behavior_seed": behavior.seed, "medium_step": med.step,
                          "medium_score": med.score})
    return ds
