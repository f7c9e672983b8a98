"""Context encoder networks.

Shapes use ``B`` for the batch, ``S = H + 1`` for stacked proprioceptive
frames (newest first) and ``N`` for points per cloud.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import nn
from ..numerics import tensor as T
from ..numerics.tensor import ShapeError, Tensor
from .sampling import GaussianHead, GaussianLatent

OBS_DIM = 45
HISTORY = 5
HEIGHT_SHAPE = (34, 22)


@dataclass
class EncoderConfig:
    obs_dim: int = OBS_DIM
    history: int = HISTORY
    mixer_channels: int = 128
    mixer_blocks: int = 2
    token_hidden: int = 16
    point_widths: tuple[int, ...] = (64, 128)
    fuse_hidden: int = 128
    decoder_hidden: int = 128
    anchor_hidden: int = 128
    zp_dim: int = 32
    ze_dim: int = 32
    height_shape: tuple[int, int] = HEIGHT_SHAPE

    @property
    def zpe_dim(self) -> int:
        return self.zp_dim + self.ze_dim

    @property
    def height_dim(self) -> int:
        return self.height_shape[0] * self.height_shape[1]


class MixerBlock(nn.Module):
    """Token mixing across time slots, then channel mixing, both residual."""

    def __init__(self, slots: int, channels: int, token_hidden: int, rng):
        self.norm1 = nn.LayerNorm(channels)
        self.token = nn.MLP([slots, token_hidden, slots], rng)
        self.norm2 = nn.LayerNorm(channels)
        self.channel = nn.MLP([channels, channels, channels], rng)

    def __call__(self, x: Tensor) -> Tensor:
        y = T.transpose(self.norm1(x))                  # (B, C, S)
        x = T.add(x, T.transpose(self.token(y)))
        return T.add(x, self.channel(self.norm2(x)))


class ProprioEncoder(nn.Module):
    def __init__(self, cfg: EncoderConfig, rng):
        slots = cfg.history + 1
        self.slots = slots
        self.obs_dim = cfg.obs_dim
        self.embed = nn.Linear(cfg.obs_dim, cfg.mixer_channels, rng)
        self.blocks = [MixerBlock(slots, cfg.mixer_channels, cfg.token_hidden, rng)
                       for _ in range(cfg.mixer_blocks)]
        self.norm = nn.LayerNorm(cfg.mixer_channels)
        self.latent = GaussianHead(slots * cfg.mixer_channels, cfg.zp_dim, rng)
        self.velocity = nn.Linear(slots * cfg.mixer_channels, 3, rng, zero=True)

    def __call__(self, stack, eps=None, rng=None) -> tuple[GaussianLatent, Tensor]:
        stack = T.as_tensor(stack)
        if stack.shape[-2:] != (self.slots, self.obs_dim):
            raise ShapeError(f"proprio encoder expects (B, {self.slots}, {self.obs_dim}), got {stack.shape}")
        x = self.embed(stack)
        for blk in self.blocks:
            x = blk(x)
        x = T.elu(self.norm(x))
        flat = T.reshape(x, (x.shape[0], -1))
        return self.latent(flat, eps=eps, rng=rng), self.velocity(flat)


def confidence_mask(stats) -> Tensor:
    """``1 - tanh(stat)`` per point; statistics must be non-negative."""
    stats = T.as_tensor(stats)
    if np.any(stats.data < 0):
        raise ValueError("confidence_mask: negative point statistic")
    return T.sub(1.0, T.tanh(stats))


def point_statistic(feats: Tensor, weights: np.ndarray) -> Tensor:
    """Per-point spread of the feature vector around the cloud's weighted mean feature.

    ``feats`` is (B, N, C) and ``weights`` (B, N) down-weights padded
    duplicates, so repeating points leaves the statistic unchanged.
    """
    w = np.asarray(weights, dtype=np.float64)
    wn = Tensor((w / w.sum(axis=1, keepdims=True))[..., None])          # (B, N, 1)
    center = T.sum_(T.mul(feats, wn), axis=1, keepdims=True)              # (B, 1, C)
    dev = T.mean(T.square(T.sub(feats, center)), axis=-1)                 # (B, N)
    return T.sqrt(T.add(dev, 1e-30))


class PointEncoder(nn.Module):
    """Shared per-point MLP, confidence filtering, max pooling, Gaussian head."""

    def __init__(self, cfg: EncoderConfig, rng):
        widths = [3, *cfg.point_widths]
        self.layers = [nn.Linear(widths[i], widths[i + 1], rng) for i in range(len(widths) - 1)]
        self.latent = GaussianHead(widths[-1], cfg.ze_dim, rng)

    def point_features(self, points) -> Tensor:
        x = T.as_tensor(points)
        for layer in self.layers:
            x = T.elu(layer(x))
        return x

    def pooled(self, points, weights=None, use_filter: bool = True) -> Tensor:
        feats = self.point_features(points)
        if use_filter:
            if weights is None:
                weights = np.ones(feats.shape[:2])
            mask = confidence_mask(point_statistic(feats, weights))
            feats = T.mul(feats, T.reshape(mask, mask.shape + (1,)))
        return T.max_(feats, axis=1)

    def __call__(self, points, weights=None, eps=None, rng=None) -> GaussianLatent:
        return self.latent(self.pooled(points, weights), eps=eps, rng=rng)


class ModalityMixer(nn.Module):
    def __init__(self, cfg: EncoderConfig, rng):
        self.zp_dim, self.ze_dim = cfg.zp_dim, cfg.ze_dim
        self.hidden = nn.Linear(cfg.zpe_dim, cfg.fuse_hidden, rng)
        self.latent = GaussianHead(cfg.fuse_hidden, cfg.zpe_dim, rng)

    def __call__(self, z_p: Tensor, z_e: Tensor, eps=None, rng=None) -> GaussianLatent:
        if z_p.shape[-1] != self.zp_dim or z_e.shape[-1] != self.ze_dim:
            raise ShapeError(f"mixer expects {self.zp_dim}+{self.ze_dim} dims, "
                             f"got {z_p.shape[-1]}+{z_e.shape[-1]}")
        return self.latent(T.elu(self.hidden(T.concat([z_p, z_e], axis=-1))), eps=eps, rng=rng)


@dataclass
class LatentContext:
    z_p: GaussianLatent
    z_e: GaussianLatent
    z_pe: GaussianLatent
    v_hat: Tensor


class ContextEncoder(nn.Module):
    """Proprio and point encoders, mixer, the two decoders and the height anchor."""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator, zero_decoders: bool = False):
        self.cfg = cfg
        self.proprio = ProprioEncoder(cfg, rng)
        self.extero = PointEncoder(cfg, rng)
        self.mixer = ModalityMixer(cfg, rng)
        self.height_decoder = nn.MLP([cfg.zpe_dim, cfg.decoder_hidden, cfg.height_dim], rng,
                                     zero_last=zero_decoders)
        self.next_obs_decoder = nn.MLP([cfg.zp_dim, cfg.decoder_hidden, cfg.obs_dim], rng,
                                       zero_last=zero_decoders)
        self.height_anchor = nn.MLP([cfg.height_dim, cfg.anchor_hidden, cfg.zpe_dim], rng)

    def encode(self, stack, points, weights=None, eps: dict | None = None,
               rng: np.random.Generator | None = None) -> LatentContext:
        eps = eps or {}
        z_p, v_hat = self.proprio(stack, eps=eps.get("z_p"), rng=rng)
        z_e = self.extero(points, weights, eps=eps.get("z_e"), rng=rng)
        z_pe = self.mixer(z_p.sample, z_e.sample, eps=eps.get("z_pe"), rng=rng)
        return LatentContext(z_p, z_e, z_pe, v_hat)

    def decode_height(self, z_pe: Tensor) -> Tensor:
        out = self.height_decoder(z_pe)
        return T.reshape(out, out.shape[:-1] + self.cfg.height_shape)

    def decode_next_obs(self, z_p: Tensor) -> Tensor:
        return self.next_obs_decoder(z_p)

    def anchor(self, heights) -> Tensor:
        h = T.as_tensor(heights)
        return self.height_anchor(T.reshape(h, h.shape[:-2] + (self.cfg.height_dim,)))
