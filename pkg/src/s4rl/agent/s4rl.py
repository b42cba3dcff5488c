"""Critic loss with the Bellman term averaged over augmented copies of each state.

The conservative regulariser is evaluated on raw states; only the Bellman
term sees augmentations. Next actions are drawn once per transition at the
raw next state and reused for every augmented copy.
"""

from __future__ import annotations

import numpy as np

from ..augment import Identity, MixUp, augment_batch
from ..core.net import backward
from ..core.rng import SeededRng
from ..envs import EnvSpec
from .cql import CriticLoss, _diag, _regularize, cql_action_samples
from .config import CqlConfig, S4rlConfig
from .critics import TwinQ, q_values
from .policy import GaussianPolicy, policy_sample


def _stacked_q(net, aug_states, actions):
    """Q over ``(i, B, d)`` augmented states with the same actions; returns ``((i, B), tape)``."""
    i, B, d = aug_states.shape
    q, tape = q_values(net, aug_states.reshape(i * B, d), np.tile(actions, (i, 1)))
    return q.reshape(i, B), tape


def augmented_next_states(batch, s4rl: S4rlConfig, spec: EnvSpec, rng: SeededRng) -> np.ndarray:
    # MixUp leaves the next state untouched
    if not s4rl.augment_targets or isinstance(s4rl.kind, MixUp):
        return batch.next_states[None]
    return augment_batch(batch.next_states, None, s4rl.kind, spec, rng, s4rl.count)


def bellman_targets(twinq: TwinQ, policy: GaussianPolicy, batch, s4rl: S4rlConfig, spec: EnvSpec,
                    rng: SeededRng, alpha: float, gamma: float) -> np.ndarray:
    """Soft targets with the target critics averaged over augmented next states."""
    nxt = policy_sample(policy, batch.next_states, rng.split("next_action"))
    s2 = augmented_next_states(batch, s4rl, spec, rng.split("augment").split("next"))
    q1 = _stacked_q(twinq.target[0], s2, nxt.action)[0].mean(axis=0)
    q2 = _stacked_q(twinq.target[1], s2, nxt.action)[0].mean(axis=0)
    soft = np.minimum(q1, q2) - alpha * nxt.log_prob
    return batch.rewards + gamma * (1.0 - batch.dones) * soft


def critic_loss(twinq: TwinQ, policy: GaussianPolicy, batch, cql: CqlConfig, s4rl: S4rlConfig,
                spec: EnvSpec, rng: SeededRng, alpha: float, gamma: float) -> CriticLoss:
    B = batch.states.shape[0]
    n_critics = len(twinq.online)
    y = bellman_targets(twinq, policy, batch, s4rl, spec, rng, alpha, gamma)
    samples = cql_action_samples(policy, batch.states, cql, rng.split("cql")) if cql.weight > 0 else None
    s_aug = augment_batch(batch.states, batch.next_states, s4rl.kind, spec,
                          rng.split("augment").split("current"), s4rl.count)
    i = s_aug.shape[0]
    total, grads = 0.0, []
    reg_vals, mses, gaps, qd, qs = [], [], [], [], []
    for net in twinq.online:
        reg = _regularize(net, batch, samples, cql, n_critics)
        q_stack, tape = _stacked_q(net, s_aug, batch.actions)
        diff = q_stack.mean(axis=0) - y
        mse = float(np.mean(diff * diff))
        g_bell = ((2.0 / (B * n_critics)) * diff) / i
        g_bell = np.broadcast_to(g_bell, (i, B)).reshape(i * B, 1)
        g2, _ = backward(net, tape, g_bell)
        if reg is None:
            grads.append(g2)
            total += mse
        else:
            g1, _ = backward(net, reg.tape, reg.grad)
            grads.append([a + b for a, b in zip(g1, g2)])
            total += cql.weight * reg.value + mse
            reg_vals.append(reg.value)
            gaps.append(float(reg.q_data.mean() - reg.q_samp.mean()))
            qd.append(float(reg.q_data.mean()))
            qs.append(float(reg.q_samp.mean()))
        mses.append(mse)
    diag = _diag(reg_vals, mses, gaps, qd, qs, y)
    diag["n_augment"] = i
    return CriticLoss(total / n_critics, grads, diag)


def policy_states(batch, s4rl: S4rlConfig, spec: EnvSpec, rng: SeededRng) -> np.ndarray:
    """States fed to the policy update; raw unless ``augment_policy`` is set."""
    if not s4rl.augment_policy or isinstance(s4rl.kind, Identity):
        return batch.states
    return augment_batch(batch.states, batch.next_states, s4rl.kind, spec, rng, 1)[0]
