from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..augment import AugmentKind, GaussianNoise, Identity
from ..errors import ConfigurationError


@dataclass
class CqlConfig:
    """Conservative regulariser settings.

    ``push_up`` selects which Q values the regulariser raises: ``"dataset"``
    (actions stored in the batch) or ``"policy"`` (the policy-sampled half of
    the action samples). ``action_grid`` switches the log-sum-exp estimate to
    exhaustive enumeration over a finite action set.
    """

    n_actions: int = 10
    weight: float = 1.0
    temperature: float = 1.0
    push_up: str = "dataset"
    action_grid: np.ndarray | None = None

    def __post_init__(self):
        if self.n_actions < 2:
            raise ConfigurationError("cql.n_actions must be >= 2")
        if self.weight < 0:
            raise ConfigurationError("cql.weight must be >= 0")
        if self.temperature <= 0:
            raise ConfigurationError("cql.temperature must be > 0")
        if self.push_up not in ("dataset", "policy"):
            raise ConfigurationError(f"cql.push_up must be 'dataset' or 'policy', got {self.push_up!r}")
        if self.action_grid is not None:
            self.action_grid = np.atleast_2d(np.asarray(self.action_grid, dtype=np.float64))


@dataclass
class S4rlConfig:
    kind: AugmentKind = field(default_factory=Identity)
    count: int = 2
    augment_targets: bool = True
    augment_policy: bool = False

    def __post_init__(self):
        if self.count < 1:
            raise ConfigurationError("s4rl.count must be >= 1")


def s4rl_gaussian(sigma: float = 3e-3, count: int = 2) -> S4rlConfig:
    return S4rlConfig(GaussianNoise(sigma), count)


@dataclass
class AgentConfig:
    algo: str = "s4rl"
    hidden: tuple[int, ...] = (64, 64)
    batch_size: int = 256
    critic_lr: float = 3e-4
    policy_lr: float = 3e-4
    gamma: float | None = None
    tau: float = 0.005
    alpha: float = 0.2
    auto_alpha: bool = False
    alpha_lr: float = 3e-4
    target_entropy: float | None = None
    cql: CqlConfig = field(default_factory=CqlConfig)
    s4rl: S4rlConfig = field(default_factory=S4rlConfig)

    def __post_init__(self):
        if self.algo not in ("s4rl", "cql"):
            raise ConfigurationError(f"agent.algo must be 's4rl' or 'cql', got {self.algo!r}")
        self.hidden = tuple(int(h) for h in self.hidden)
        if not self.hidden or min(self.hidden) < 1:
            raise ConfigurationError("agent.hidden needs at least one positive width")
        if self.batch_size < 1:
            raise ConfigurationError("agent.batch_size must be > 0")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigurationError("agent.tau must lie in [0, 1]")
        if self.alpha <= 0:
            raise ConfigurationError("agent.alpha must be > 0")
        if self.gamma is not None and not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError("agent.gamma must lie in [0, 1)")
        for name in ("critic_lr", "policy_lr", "alpha_lr"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"agent.{name} must be > 0")
