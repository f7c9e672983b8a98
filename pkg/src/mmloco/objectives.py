"""Auxiliary objectives: velocity estimation, the two VAE losses with an
adaptive beta, the latent contrastive loss, the versatility (mutual
information) gain and the adaptive bootstrapping probability."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .numerics import tensor as T
from .numerics.tensor import ShapeError, Tensor

STD_FLOOR = 1e-6
VAR_FLOOR = 1e-6
LOG_2PI_E = math.log(2.0 * math.pi * math.e)


def _mse(pred, target) -> Tensor:
    pred, target = T.as_tensor(pred), T.as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse: shape mismatch {pred.shape} vs {target.shape}")
    return T.mean(T.square(T.sub(pred, target)))


def loss_estimation(v_hat, v_true) -> Tensor:
    return _mse(v_hat, v_true)


def gaussian_kl(mean, std) -> Tensor:
    """``KL(N(mean, std^2) || N(0, I))`` summed over the last axis, averaged over the rest."""
    mean, std = T.as_tensor(mean), T.as_tensor(std)
    if np.any(std.data <= 0):
        raise ValueError("gaussian_kl: std must be positive")
    s = T.clip(std, STD_FLOOR, None)
    var = T.square(s)
    per_dim = T.mul(0.5, T.sub(T.add(var, T.square(mean)), T.add(1.0, T.mul(2.0, T.log(s)))))
    total = T.sum_(per_dim, axis=-1)
    return T.mean(total) if total.ndim else total


def loss_vae_proprio(o_next_pred, o_next, z_mean, z_std, beta: float) -> Tensor:
    return T.add(_mse(o_next_pred, o_next), T.mul(beta, gaussian_kl(z_mean, z_std)))


def loss_vae_extero(h_pred, h_true, z_mean, z_std, beta: float) -> Tensor:
    return T.add(_mse(h_pred, h_true), T.mul(beta, gaussian_kl(z_mean, z_std)))


@dataclass
class BetaSchedulerState:
    beta: float = 5.0
    delta: float = 0.1
    tau: float = 0.05
    beta_min: float = 0.5
    beta_max: float = 10.0

    def __post_init__(self):
        if not self.beta_min <= self.beta_max:
            raise ValueError("beta_min must not exceed beta_max")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        self.beta = min(max(self.beta, self.beta_min), self.beta_max)


def adaptive_beta_update(state: BetaSchedulerState, recon_loss: float) -> BetaSchedulerState:
    if recon_loss < 0:
        raise ValueError("adaptive_beta_update: reconstruction loss must be non-negative")
    # exponent clipped so a huge loss cannot underflow through 0 * beta
    k = math.exp(max(-700.0, min(700.0, state.delta * (state.tau - recon_loss))))
    state.beta = min(max(k * state.beta, state.beta_min), state.beta_max)
    return state


@dataclass
class ContrastiveConfig:
    margin: float = 1.0
    lam: float = 0.5

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("contrastive margin must be positive")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("contrastive lambda must be in [0, 1]")


def loss_contrastive(z, anchor, z_random, cfg: ContrastiveConfig = ContrastiveConfig()) -> Tensor:
    """Pull toward the anchor, push at least ``margin`` away from a random negative.

    The hinge is applied per coordinate before the squared norm.  Batched
    inputs are averaged over the leading axes.
    """
    z, anchor, z_random = T.as_tensor(z), T.as_tensor(anchor), T.as_tensor(z_random)
    if z.shape != anchor.shape or z.shape != z_random.shape:
        raise ShapeError(f"contrastive: shapes {z.shape}, {anchor.shape}, {z_random.shape}")
    pull = T.sum_(T.square(T.sub(z, anchor)), axis=-1)
    hinge = T.relu(T.sub(cfg.margin, T.sub(z, z_random)))
    push = T.sum_(T.square(hinge), axis=-1)
    out = T.add(T.mul(cfg.lam, pull), T.mul(1.0 - cfg.lam, push))
    return T.mean(out) if out.ndim else out


def gaussian_entropy(std) -> Tensor:
    """Batch mean of ``0.5 * sum log(2 pi e sigma^2)``."""
    s = T.clip(T.as_tensor(std), STD_FLOOR, None)
    per = T.add(T.mul(0.5 * s.shape[-1], LOG_2PI_E), T.sum_(T.log(s), axis=-1))
    return T.mean(per) if per.ndim else per


def versatility_gain(samples, stds) -> Tensor:
    """``H(z) - H(z|o)`` over a batch.

    ``H(z)`` is the entropy of a diagonal Gaussian moment-matched to the batch
    of samples; ``H(z|o)`` is the mean posterior entropy.
    """
    samples, stds = T.as_tensor(samples), T.as_tensor(stds)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ValueError("versatility_gain needs a batch of at least 2 latent vectors")
    var = T.add(T.var(samples, axis=0), VAR_FLOOR)
    h_marg = T.add(0.5 * samples.shape[1] * LOG_2PI_E, T.mul(0.5, T.sum_(T.log(var))))
    return T.sub(h_marg, gaussian_entropy(stds))


DEFAULT_ENCODER_KL_SCALE = 0.1


def encoder_kl_scale(config=None) -> float:
    """``lambda_e``; 1.0 turns the combined objective into pure visitation-entropy maximization."""
    if config is None:
        return DEFAULT_ENCODER_KL_SCALE
    return float(getattr(config, "encoder_kl_scale", DEFAULT_ENCODER_KL_SCALE))


class ReturnsWindow:
    """Cumulative returns of the most recent completed episodes."""

    def __init__(self, size: int = 100):
        self.returns: deque[float] = deque(maxlen=size)

    def extend(self, values) -> None:
        self.returns.extend(float(v) for v in np.ravel(values))

    def __len__(self) -> int:
        return len(self.returns)


def bootstrap_probability(returns) -> float:
    """``1 - tanh(std / |mean|)``; 0 when the mean return is exactly 0."""
    r = np.fromiter(returns.returns if isinstance(returns, ReturnsWindow) else returns, dtype=np.float64)
    if r.size == 0:
        raise ValueError("bootstrap_probability: empty returns window")
    m = float(np.mean(r))
    if m == 0.0:
        return 0.0
    cv = float(np.std(r)) / abs(m)
    return float(1.0 - math.tanh(cv))
