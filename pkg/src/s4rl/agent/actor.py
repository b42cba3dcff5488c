"""Entropy-regularised policy improvement against the twin critics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.net import backward
from ..core.rng import SeededRng
from .critics import TwinQ, q_values
from .policy import GaussianPolicy, policy_backward, policy_sample


@dataclass
class PolicyLoss:
    loss: float
    grads: list[np.ndarray]
    log_prob: np.ndarray
    q_min: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def policy_loss(policy: GaussianPolicy, twinq: TwinQ, states, alpha: float, rng: SeededRng) -> PolicyLoss:
    """``mean(alpha * log pi(a|s) - min_k Q_k(s, a))`` with ``a`` reparameterised from ``pi(.|s)``.

    Gradients flow through the critics into the action, never into critic weights.
    """
    smp = policy_sample(policy, states, rng)
    B = states.shape[0]
    sd = states.shape[1]
    qs, tapes = [], []
    for net in twinq.online:
        q, tape = q_values(net, states, smp.action)
        qs.append(q)
        tapes.append(tape)
    q_min = np.minimum(qs[0], qs[1])
    loss = float(np.mean(alpha * smp.log_prob - q_min))
    # ties go to the first critic, matching np.minimum's value either way
    pick0 = qs[0] <= qs[1]
    grad_action = np.zeros_like(smp.action)
    for k, (net, tape) in enumerate(zip(twinq.online, tapes)):
        mask = pick0 if k == 0 else ~pick0
        if not mask.any():
            continue
        g_out = np.where(mask, -1.0 / B, 0.0)[:, None]
        _, g_in = backward(net, tape, g_out, need_input_grad=True)
        grad_action += g_in[:, sd:]
    grads = policy_backward(policy, smp, grad_action, np.full(B, alpha / B))
    diag = {
        "policy_loss": loss,
        "policy_q": float(q_min.mean()),
        "log_prob": float(smp.log_prob.mean()),
        "log_std": float(smp.log_std.mean()),
    }
    return PolicyLoss(loss, grads, smp.log_prob, q_min, diag)
