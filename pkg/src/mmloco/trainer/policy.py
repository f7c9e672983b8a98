"""Actor, critic and the bundle of every trained network."""
from __future__ import annotations

import math

import numpy as np

from ..encoders.networks import ContextEncoder, EncoderConfig
from ..numerics import nn
from ..numerics import tensor as T
from ..numerics.tensor import Tensor
from ..terrainsim.observations import OBS_DIM, PRIVILEGED_DIM

N_ACTIONS = 12
LOG_2PI = math.log(2.0 * math.pi)


class Actor(nn.Module):
    """Diagonal Gaussian over joint-target offsets from ``o_t + z_pe + v``."""

    def __init__(self, zpe_dim: int, hidden, rng, init_std: float = 1.0):
        self.net = nn.MLP([OBS_DIM + zpe_dim + 3, *hidden, N_ACTIONS], rng, last_gain=0.01)
        self.log_std = nn.param(np.full(N_ACTIONS, math.log(init_std)))

    def __call__(self, obs, z_pe, v_input) -> Tensor:
        return self.net(T.concat([T.as_tensor(obs), T.as_tensor(z_pe), T.as_tensor(v_input)], axis=-1))

    def log_prob(self, mean: Tensor, actions: np.ndarray) -> Tensor:
        std = T.exp(self.log_std)
        z = T.div(T.sub(actions, mean), std)
        per = T.add(T.mul(0.5, T.square(z)), T.add(self.log_std, 0.5 * LOG_2PI))
        return T.neg(T.sum_(per, axis=-1))

    def entropy(self) -> Tensor:
        return T.sum_(T.add(self.log_std, 0.5 * (LOG_2PI + 1.0)))


class Critic(nn.Module):
    """Value from the privileged state, the command and the encoded height scan."""

    def __init__(self, zpe_dim: int, hidden, rng):
        self.net = nn.MLP([PRIVILEGED_DIM + 3 + zpe_dim, *hidden, 1], rng)

    def __call__(self, privileged, command, height_code) -> Tensor:
        x = T.concat([T.as_tensor(privileged), T.as_tensor(command), T.as_tensor(height_code)], axis=-1)
        out = self.net(x)
        return T.reshape(out, out.shape[:-1])


class ActorCritic(nn.Module):
    """Parameter groups: ``encoder`` (context encoder, decoders, height anchor),
    ``actor`` and ``critic``; each gets its own optimizer state."""

    GROUPS = ("encoder", "actor", "critic")

    def __init__(self, enc_cfg: EncoderConfig, actor_hidden, critic_hidden, rng, init_std: float = 1.0):
        self.encoder = ContextEncoder(enc_cfg, rng)
        self.actor = Actor(enc_cfg.zpe_dim, actor_hidden, rng, init_std)
        self.critic = Critic(enc_cfg.zpe_dim, critic_hidden, rng)

    def group_parameters(self) -> dict[str, dict[str, Tensor]]:
        return {g: getattr(self, g).named_parameters(g + ".") for g in self.GROUPS}

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        named = self.named_parameters()
        if set(named) != set(snap):
            missing = sorted(set(named) ^ set(snap))
            raise KeyError(f"parameter names differ: {missing[:5]}")
        for k, p in named.items():
            if p.data.shape != snap[k].shape:
                raise ValueError(f"{k}: shape {snap[k].shape} does not match {p.data.shape}")
            p.data = np.array(snap[k], dtype=np.float64)
