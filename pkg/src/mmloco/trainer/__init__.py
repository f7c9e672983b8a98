"""Asymmetric actor-critic PPO with the auxiliary encoder objectives."""
from .config import ConfigError, PPOConfig, RunConfig, TrainConfig, dump_config, load_config, parse_config
from .policy import ActorCritic, Actor, Critic
from .ppo import LOSS_COLUMNS, minibatch_loss, ppo_update
from .rollout import RolloutBatch, collect_rollouts, gae, gae_advantages, normalize_advantages, policy_step
from .train import (METRIC_COLUMNS, TrainState, init_state, load_checkpoint, load_model, read_metrics,
                    save_checkpoint, train, train_iteration)
