"""Actor-critic agent: policy, twin critics, conservative and augmented critic losses."""

from .actor import PolicyLoss, policy_loss
from .config import AgentConfig, CqlConfig, S4rlConfig, s4rl_gaussian
from .cql import (ActionSamples, CriticLoss, cql_action_samples, cql_critic_loss, cql_regularizer,
                  logsumexp_estimate, plain_targets)
from .critics import TwinQ, make_twin_q, q_values
from .learner import (ActorCritic, config_from_dict, config_to_dict, critic_step, load_agent,
                      make_agent, save_agent, train_step)
from .policy import GaussianPolicy, log_prob, make_policy, mean_action, policy_sample
from .s4rl import bellman_targets, critic_loss

__all__ = [
    "ActionSamples", "ActorCritic", "AgentConfig", "CqlConfig", "CriticLoss", "GaussianPolicy",
    "PolicyLoss", "S4rlConfig", "TwinQ", "bellman_targets", "config_from_dict", "config_to_dict",
    "cql_action_samples", "cql_critic_loss", "cql_regularizer", "critic_loss", "critic_step",
    "load_agent", "log_prob", "logsumexp_estimate", "make_agent", "make_policy", "make_twin_q",
    "mean_action", "plain_targets", "policy_loss", "policy_sample", "q_values", "s4rl_gaussian",
    "save_agent", "train_step",
]
