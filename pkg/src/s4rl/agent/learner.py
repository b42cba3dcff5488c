"""Actor-critic container, one training step, and agent checkpoints."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..augment import parse_augment
from ..core.adam import AdamState, adam_step
from ..core.net import load_checkpoint, save_checkpoint
from ..core.rng import SeededRng
from ..envs import EnvSpec
from ..errors import NumericalError, TrainingHalted
from .actor import policy_loss
from .config import AgentConfig, CqlConfig, S4rlConfig
from .cql import cql_critic_loss
from .critics import TwinQ, make_twin_q
from .policy import GaussianPolicy, make_policy
from .s4rl import critic_loss, policy_states


@dataclass
class ActorCritic:
    spec: EnvSpec
    config: AgentConfig
    policy: GaussianPolicy
    twinq: TwinQ
    critic_opt: list[AdamState]
    policy_opt: AdamState
    log_alpha: np.ndarray
    alpha_opt: AdamState
    step: int = 0

    @property
    def gamma(self) -> float:
        return self.spec.gamma if self.config.gamma is None else self.config.gamma

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    @property
    def target_entropy(self) -> float:
        te = self.config.target_entropy
        return -float(self.spec.action_dim) if te is None else te

    def copy(self) -> ActorCritic:
        return ActorCritic(self.spec, self.config, self.policy.copy(), self.twinq.copy(),
                           [o.copy() for o in self.critic_opt], self.policy_opt.copy(),
                           self.log_alpha.copy(), self.alpha_opt.copy(), self.step)


def make_agent(spec: EnvSpec, config: AgentConfig, rng: SeededRng) -> ActorCritic:
    policy = make_policy(spec.state_dim, spec.action_dim, config.hidden, rng.split("policy"),
                         spec.action_high)
    twinq = make_twin_q(spec.state_dim, spec.action_dim, config.hidden, rng.split("critics"),
                        config.tau)
    critic_opt = [AdamState.for_params(n.params(), lr=config.critic_lr, names=n.param_names())
                  for n in twinq.online]
    policy_opt = AdamState.for_params(policy.net.params(), lr=config.policy_lr,
                                      names=policy.net.param_names())
    log_alpha = np.array([math.log(config.alpha)])
    alpha_opt = AdamState.for_params([log_alpha], lr=config.alpha_lr, names=["log_alpha"])
    return ActorCritic(spec, config, policy, twinq, critic_opt, policy_opt, log_alpha, alpha_opt)


def _finite(agent: ActorCritic, term: str, value) -> None:
    if not np.all(np.isfinite(value)):
        raise TrainingHalted(agent.step, term)


def _critic_update(agent: ActorCritic, batch, rng: SeededRng) -> dict:
    cfg = agent.config
    try:
        if cfg.algo == "cql":
            cl = cql_critic_loss(agent.twinq, agent.policy, batch, cfg.cql, agent.alpha, agent.gamma,
                                 rng)
        else:
            cl = critic_loss(agent.twinq, agent.policy, batch, cfg.cql, cfg.s4rl, agent.spec, rng,
                             agent.alpha, agent.gamma)
    except NumericalError as exc:
        raise TrainingHalted(agent.step, "critic_loss", str(exc)) from exc
    _finite(agent, "critic_loss", cl.loss)
    for k, (net, opt) in enumerate(zip(agent.twinq.online, agent.critic_opt)):
        try:
            adam_step(net.params(), cl.grads[k], opt)
        except NumericalError as exc:
            raise TrainingHalted(agent.step, f"critic{k}", str(exc)) from exc
    diag = {"critic_loss": cl.loss}
    diag.update(cl.diagnostics)
    return diag


def critic_step(agent: ActorCritic, batch, rng: SeededRng) -> dict:
    """Critic-only update (no policy step, no target update)."""
    return _critic_update(agent, batch, rng)


def train_step(agent: ActorCritic, dataset, rng: SeededRng, batch=None) -> dict:
    """One critic step, one policy step, optional temperature step, then Polyak targets.

    ``dataset`` only needs ``sample_batch(n, rng)``; pass ``batch`` to skip sampling.
    """
    cfg = agent.config
    if batch is None:
        batch = dataset.sample_batch(cfg.batch_size, rng.split("batch"))
    diag = _critic_update(agent, batch, rng)

    states = batch.states
    if cfg.algo == "s4rl":
        states = policy_states(batch, cfg.s4rl, agent.spec, rng.split("augment").split("policy"))
    try:
        pl = policy_loss(agent.policy, agent.twinq, states, agent.alpha, rng.split("actor"))
    except NumericalError as exc:
        raise TrainingHalted(agent.step, "policy_loss", str(exc)) from exc
    _finite(agent, "policy_loss", pl.loss)
    try:
        adam_step(agent.policy.net.params(), pl.grads, agent.policy_opt)
    except NumericalError as exc:
        raise TrainingHalted(agent.step, "policy", str(exc)) from exc
    diag.update(pl.diagnostics)

    if cfg.auto_alpha:
        # d/dlog_alpha of -log_alpha * mean(log_prob + target_entropy)
        g = -np.mean(pl.log_prob + agent.target_entropy)
        _finite(agent, "alpha", g)
        adam_step([agent.log_alpha], [np.array([g])], agent.alpha_opt)
    diag["alpha"] = agent.alpha

    agent.twinq.update_targets(cfg.tau)
    agent.step += 1
    diag["step"] = agent.step
    return diag


# -- serialisation -----------------------------------------------------------------

def config_to_dict(cfg: AgentConfig) -> dict:
    d = asdict(cfg)
    d["hidden"] = list(cfg.hidden)
    grid = cfg.cql.action_grid
    d["cql"]["action_grid"] = None if grid is None else grid.tolist()
    d["s4rl"]["kind"] = str(cfg.s4rl.kind)
    return d


def config_from_dict(d: dict) -> AgentConfig:
    d = dict(d)
    cql = CqlConfig(**d.pop("cql"))
    s4 = dict(d.pop("s4rl"))
    s4["kind"] = parse_augment(s4["kind"])
    return AgentConfig(cql=cql, s4rl=S4rlConfig(**s4), **d)


def save_agent(path, agent: ActorCritic, seed: int, extra: dict | None = None,
               extra_arrays: dict | None = None) -> None:
    nets = {"policy": agent.policy.net}
    for k, (on, tg) in enumerate(zip(agent.twinq.online, agent.twinq.target)):
        nets[f"q{k}"] = on
        nets[f"q{k}_target"] = tg
    arrays = {"log_alpha": agent.log_alpha}
    opts = {"policy_opt": agent.policy_opt, "alpha_opt": agent.alpha_opt}
    opts.update({f"critic_opt{k}": o for k, o in enumerate(agent.critic_opt)})
    for name, opt in opts.items():
        arrays.update(opt.to_arrays(name))
    arrays.update(extra_arrays or {})
    meta = {
        "agent": {"config": config_to_dict(agent.config), "spec": agent.spec.to_dict(),
                  "step": agent.step, "optim": {n: o.hyper() for n, o in opts.items()}},
        "user": extra or {},
    }
    save_checkpoint(path, nets, seed, meta, arrays)


def load_agent(path) -> tuple[ActorCritic, dict, dict]:
    """Returns ``(agent, header, extra_arrays)``."""
    nets, header, arrays = load_checkpoint(path)
    meta = header["extra"]["agent"]
    cfg = config_from_dict(meta["config"])
    spec = EnvSpec.from_dict(meta["spec"])
    n_q = sum(1 for k in nets if k.startswith("q") and not k.endswith("_target"))
    twinq = TwinQ([nets[f"q{k}"] for k in range(n_q)], [nets[f"q{k}_target"] for k in range(n_q)],
                  cfg.tau)
    policy = GaussianPolicy(nets["policy"], spec.action_dim, spec.action_high)
    opt = meta["optim"]
    agent = ActorCritic(
        spec, cfg, policy, twinq,
        [AdamState.from_arrays(f"critic_opt{k}", opt[f"critic_opt{k}"], arrays) for k in range(n_q)],
        AdamState.from_arrays("policy_opt", opt["policy_opt"], arrays),
        np.array(arrays["log_alpha"]),
        AdamState.from_arrays("alpha_opt", opt["alpha_opt"], arrays),
        int(meta["step"]),
    )
    return agent, header, arrays
