"""Conservative regulariser and the plain (unaugmented) CQL critic loss."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core.net import backward, forward
from ..core.rng import SeededRng
from .config import CqlConfig
from .critics import TwinQ, q_values, sa_input
from .policy import GaussianPolicy, policy_sample


@dataclass
class CriticLoss:
    loss: float
    grads: list[list[np.ndarray]]
    diagnostics: dict = field(default_factory=dict)


@dataclass
class ActionSamples:
    actions: np.ndarray        # (B, N, action_dim)
    log_density: np.ndarray    # (B, N); zeros under exhaustive enumeration
    exhaustive: bool
    policy_cols: slice


def cql_action_samples(policy: GaussianPolicy, states, cfg: CqlConfig, rng: SeededRng) -> ActionSamples:
    """Half uniform, half current-policy actions per state, with their proposal log-densities."""
    B = states.shape[0]
    ad, hi = policy.action_dim, policy.action_high
    if cfg.action_grid is not None:
        grid = cfg.action_grid
        acts = np.broadcast_to(grid, (B,) + grid.shape).copy()
        return ActionSamples(acts, np.zeros(acts.shape[:2]), True, slice(0, 0))
    n_u = cfg.n_actions // 2
    n_p = cfg.n_actions - n_u
    uni = rng.split("uniform").uniform(-hi, hi, (B, n_u, ad))
    log_u = np.full((B, n_u), -ad * math.log(2.0 * hi))
    smp = policy_sample(policy, np.repeat(states, n_p, axis=0), rng.split("policy"))
    pol = smp.action.reshape(B, n_p, ad)
    log_p = smp.log_prob.reshape(B, n_p)
    return ActionSamples(np.concatenate([uni, pol], axis=1), np.concatenate([log_u, log_p], axis=1),
                         False, slice(n_u, n_u + n_p))


def logsumexp_estimate(q_samp, samples: ActionSamples, temperature: float = 1.0):
    """Importance-weighted ``T log sum_a exp(Q(s,a)/T)`` and its gradient w.r.t. ``q_samp``."""
    x = q_samp / temperature - samples.log_density
    m = x.max(axis=1, keepdims=True)
    z = np.log(np.exp(x - m).sum(axis=1, keepdims=True)) + m
    weights = np.exp(x - z)
    lse = z[:, 0]
    if not samples.exhaustive:
        lse = lse - math.log(x.shape[1])
    return temperature * lse, weights


def cql_regularizer(net, states, data_actions, samples: ActionSamples, cfg: CqlConfig, scale: float):
    """Forward the regulariser for one critic.

    Returns ``(value, output_grad, tape, q_data, q_samp)`` where ``output_grad`` is
    ``scale * d value / d Q`` for the stacked ``[data; samples]`` rows.
    """
    B, N = samples.actions.shape[:2]
    rows = np.concatenate([
        sa_input(states, data_actions),
        sa_input(np.repeat(states, N, axis=0), samples.actions.reshape(B * N, -1)),
    ])
    out, tape = forward(net, rows)
    q_data = out[:B, 0]
    q_samp = out[B:, 0].reshape(B, N)
    lse, w = logsumexp_estimate(q_samp, samples, cfg.temperature)
    g_data = np.zeros(B)
    g_samp = w / B
    if cfg.push_up == "policy" and not samples.exhaustive:
        cols = samples.policy_cols
        push = q_samp[:, cols].mean(axis=1)
        g_samp[:, cols] -= 1.0 / (B * (cols.stop - cols.start))
    else:
        push = q_data
        g_data -= 1.0 / B
    value = float(np.mean(lse - push))
    grad = scale * np.concatenate([g_data, g_samp.reshape(-1)])[:, None]
    return value, grad, tape, q_data, q_samp


@dataclass
class RegBlock:
    value: float
    grad: np.ndarray
    tape: object
    q_data: np.ndarray
    q_samp: np.ndarray


def _regularize(net, batch, samples: ActionSamples | None, cql: CqlConfig, n_critics: int):
    if samples is None:
        return None
    return RegBlock(*cql_regularizer(net, batch.states, batch.actions, samples, cql,
                                     cql.weight / n_critics))


def plain_targets(twinq: TwinQ, policy: GaussianPolicy, batch, alpha: float, gamma: float,
                  rng: SeededRng) -> np.ndarray:
    nxt = policy_sample(policy, batch.next_states, rng.split("next_action"))
    q1 = q_values(twinq.target[0], batch.next_states, nxt.action)[0]
    q2 = q_values(twinq.target[1], batch.next_states, nxt.action)[0]
    soft = np.minimum(q1, q2) - alpha * nxt.log_prob
    return batch.rewards + gamma * (1.0 - batch.dones) * soft


def cql_critic_loss(twinq: TwinQ, policy: GaussianPolicy, batch, cql: CqlConfig, alpha: float,
                    gamma: float, rng: SeededRng) -> CriticLoss:
    """Baseline CQL loss on raw states, averaged over the two critics."""
    B = batch.states.shape[0]
    n_critics = len(twinq.online)
    y = plain_targets(twinq, policy, batch, alpha, gamma, rng)
    samples = cql_action_samples(policy, batch.states, cql, rng.split("cql")) if cql.weight > 0 else None
    total, grads = 0.0, []
    reg_vals, mses, gaps, qd, qs = [], [], [], [], []
    for net in twinq.online:
        reg = _regularize(net, batch, samples, cql, n_critics)
        q, tape = q_values(net, batch.states, batch.actions)
        diff = q - y
        mse = float(np.mean(diff * diff))
        g_bell = ((2.0 / (B * n_critics)) * diff)[:, None]
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
    return CriticLoss(total / n_critics, grads, _diag(reg_vals, mses, gaps, qd, qs, y))


def _diag(reg_vals, mses, gaps, qd, qs, y) -> dict:
    out = {"bellman_mse": float(np.mean(mses)), "target_mean": float(np.mean(y))}
    if reg_vals:
        # regulariser skipped entirely when its weight is zero
        out.update({
            "cql_reg": float(np.mean(reg_vals)),
            "conservative_gap": float(np.mean(gaps)),
            "q_data": float(np.mean(qd)),
            "q_sampled": float(np.mean(qs)),
        })
    return out
