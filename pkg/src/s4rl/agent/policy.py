"""Tanh-squashed Gaussian policy with reparameterised gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core.net import DenseNet, Tape, backward, forward, init_dense
from ..core.rng import SeededRng
from ..errors import NumericalError

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class GaussianPolicy:
    """``net`` maps a state to ``[mean, raw log-std]``; actions are ``high * tanh(u)``."""

    net: DenseNet
    action_dim: int
    action_high: float = 1.0

    def copy(self) -> GaussianPolicy:
        return GaussianPolicy(self.net.copy(), self.action_dim, self.action_high)


def make_policy(state_dim: int, action_dim: int, hidden, rng: SeededRng,
                action_high: float = 1.0, activation: str = "tanh") -> GaussianPolicy:
    net = init_dense((state_dim, *hidden, 2 * action_dim), activation, rng)
    return GaussianPolicy(net, action_dim, action_high)


def log1m_tanh_sq(u):
    """``log(1 - tanh(u)^2)`` without cancellation for large ``|u|``."""
    return 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


@dataclass
class PolicySample:
    """Everything the reparameterised backward pass needs."""

    action: np.ndarray
    log_prob: np.ndarray
    mean: np.ndarray
    log_std: np.ndarray
    eps: np.ndarray
    u: np.ndarray
    in_range: np.ndarray
    tape: Tape


def _heads(policy: GaussianPolicy, states):
    out, tape = forward(policy.net, np.atleast_2d(states))
    if not np.isfinite(out).all():
        raise NumericalError("policy network produced non-finite output")
    d = policy.action_dim
    mean = out[:, :d]
    raw = out[:, d:]
    in_range = (raw >= LOG_STD_MIN) & (raw <= LOG_STD_MAX)
    return mean, np.clip(raw, LOG_STD_MIN, LOG_STD_MAX), in_range, tape


def _log_prob(policy, eps, log_std, u):
    gauss = -0.5 * eps * eps - log_std - _HALF_LOG_2PI
    jac = math.log(policy.action_high) + log1m_tanh_sq(u)
    return np.sum(gauss - jac, axis=-1)


def policy_sample(policy: GaussianPolicy, states, rng: SeededRng | None = None,
                  deterministic: bool = False) -> PolicySample:
    """Draw ``a = high * tanh(mean + std * eps)`` and its log-density.

    With ``deterministic=True`` (or no rng) ``eps = 0``, i.e. the mean action.
    """
    mean, log_std, in_range, tape = _heads(policy, states)
    if deterministic or rng is None:
        eps = np.zeros_like(mean)
    else:
        eps = rng.standard_normal(mean.shape)
    u = mean + np.exp(log_std) * eps
    action = policy.action_high * np.tanh(u)
    return PolicySample(action, _log_prob(policy, eps, log_std, u), mean, log_std, eps, u,
                        in_range, tape)


def mean_action(policy: GaussianPolicy, states) -> np.ndarray:
    return policy_sample(policy, states, deterministic=True).action


def log_prob(policy: GaussianPolicy, states, actions) -> np.ndarray:
    """Log-density of given actions (clipped just inside the open box)."""
    mean, log_std, _, _ = _heads(policy, states)
    y = np.clip(np.asarray(actions, dtype=np.float64) / policy.action_high,
                -1.0 + 1e-12, 1.0 - 1e-12)
    u = np.arctanh(y)
    eps = (u - mean) / np.exp(log_std)
    return _log_prob(policy, eps, log_std, u)


def policy_backward(policy: GaussianPolicy, sample: PolicySample, grad_action, grad_log_prob):
    """Parameter gradients for ``sum(grad_action * a + grad_log_prob * log_prob)``.

    Noise ``eps`` is held fixed (reparameterisation).
    """
    grad_action = np.zeros_like(sample.action) if grad_action is None else grad_action
    glp = np.asarray(grad_log_prob, dtype=np.float64).reshape(-1, 1)
    t = np.tanh(sample.u)
    std = np.exp(sample.log_std)
    # dlogp/du = 2 tanh(u); da/du = high (1 - tanh^2)
    g_u = grad_action * policy.action_high * (1.0 - t * t) + glp * 2.0 * t
    g_mean = g_u
    g_log_std = g_u * std * sample.eps - glp
    g_log_std = g_log_std * sample.in_range
    grads, _ = backward(policy.net, sample.tape, np.concatenate([g_mean, g_log_std], axis=1))
    return grads
