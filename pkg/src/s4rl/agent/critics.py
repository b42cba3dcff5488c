"""Twin state-action critics with Polyak-averaged targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import polyak_update
from ..core.net import DenseNet, forward, init_dense
from ..core.rng import SeededRng


@dataclass
class TwinQ:
    online: list[DenseNet]
    target: list[DenseNet]
    tau: float = 0.005

    def copy(self) -> TwinQ:
        return TwinQ([n.copy() for n in self.online], [n.copy() for n in self.target], self.tau)

    def update_targets(self, tau: float | None = None) -> None:
        tau = self.tau if tau is None else tau
        for tgt, onl in zip(self.target, self.online):
            polyak_update(tgt, onl, tau)


def make_twin_q(state_dim: int, action_dim: int, hidden, rng: SeededRng, tau: float = 0.005,
                activation: str = "relu") -> TwinQ:
    online = [init_dense((state_dim + action_dim, *hidden, 1), activation, rng.split(f"q{k}"))
              for k in range(2)]
    return TwinQ(online, [n.copy() for n in online], tau)


def sa_input(states, actions) -> np.ndarray:
    return np.concatenate([states, actions], axis=-1)


def q_values(net: DenseNet, states, actions):
    """``(q, tape)`` with ``q`` of shape ``(n,)``."""
    out, tape = forward(net, sa_input(states, actions))
    return out[:, 0], tape
