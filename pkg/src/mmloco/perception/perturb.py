"""Exteroceptive perturbations: distance-scaled Gaussian noise, tiered
uniform noise, sensor alignment bias and elevation-aware pruning.

Per-point randomness comes from a counter-based hash of
``(seed, step, stream, quantized point coordinates)`` instead of a sequential
generator.  A point therefore receives the same draw wherever it sits in the
array, which makes every perturbation commute with point permutations and
lets each environment be replayed independently.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import rpy_to_matrix

NOISE_DIST_REF = 1.0     # m, distance at which the std doubles
PRUNE_DIST_MAX = 1.5     # m
PRUNE_ELEV_MAX = 0.5     # m
_QUANT = 1e-6            # m, coordinate quantum for hashing

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


def _mix(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer
    x = x + _GOLD
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def point_hash(points: np.ndarray, seed, step, stream: int) -> np.ndarray:
    """uint64 hash per point, shape ``points.shape[:-1]``."""
    q = np.round(np.asarray(points, dtype=np.float64) / _QUANT).astype(np.int64).view(np.uint64)
    shape = q.shape[:-1]
    seed = np.broadcast_to(np.asarray(seed, dtype=np.int64), shape).view(np.uint64)
    step = np.broadcast_to(np.asarray(step, dtype=np.int64), shape).view(np.uint64)
    with np.errstate(over="ignore"):
        h = _mix(seed.copy())
        h = _mix(h ^ step)
        h = _mix(h ^ np.uint64(stream))
        for k in range(3):
            h = _mix(h ^ q[..., k])
    return h


def _uniform(h: np.ndarray) -> np.ndarray:
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / (1 << 53))


def hashed_uniform(points, seed, step, stream: int, n: int) -> np.ndarray:
    """``(..., P, n)`` uniforms in (0, 1)."""
    h = point_hash(points, seed, step, stream)
    out = np.empty(h.shape + (n,))
    with np.errstate(over="ignore"):
        for k in range(n):
            h = _mix(h)
            out[..., k] = _uniform(h)
    return out


def hashed_normal(points, seed, step, stream: int, n: int = 3) -> np.ndarray:
    u = hashed_uniform(points, seed, step, stream, 2 * n)
    r = np.sqrt(-2.0 * np.log(u[..., :n]))
    return r * np.cos(2.0 * np.pi * u[..., n:])


@dataclass
class PerturbationConfig:
    noise_mean: np.ndarray = field(default_factory=lambda: np.zeros(3))   # (mu_x, mu_y, mu_z), m
    noise_std: np.ndarray = field(default_factory=lambda: np.zeros(3))    # (sigma_x, sigma_y, sigma_z), m
    bias: np.ndarray = field(default_factory=lambda: np.zeros(6))         # dx, dy, dz, droll, dpitch, dyaw
    prune_prob: float = 0.0
    tier_amplitude: float = 0.0   # half-width of the per-axis uniform measurement noise, m


def apply_noise_model(points: np.ndarray, cfg: PerturbationConfig, seed=0, step=0) -> np.ndarray:
    """Shift each point by ``N(mu, (sigma * (1 + d / d_ref))^2)`` per axis.

    ``cfg`` fields may carry leading batch axes matching ``points[..., 0, 0]``.
    """
    pts = np.asarray(points, dtype=np.float64)
    mu = np.asarray(cfg.noise_mean, dtype=np.float64)[..., None, :]
    sig = np.asarray(cfg.noise_std, dtype=np.float64)[..., None, :]
    if not np.any(sig):
        return pts + mu
    d = np.linalg.norm(pts, axis=-1, keepdims=True)
    eps = hashed_normal(pts, seed, step, stream=1)
    return pts + mu + sig * (1.0 + d / NOISE_DIST_REF) * eps


def apply_tier_noise(points: np.ndarray, amplitude, seed=0, step=0) -> np.ndarray:
    """Uniform ``[-a, a]`` displacement on every axis, ``a`` from the episode's noise tier."""
    pts = np.asarray(points, dtype=np.float64)
    a = np.asarray(amplitude, dtype=np.float64)[..., None, None]
    if not np.any(a):
        return pts.copy()
    u = hashed_uniform(pts, seed, step, stream=2, n=3)
    return pts + a * (2.0 * u - 1.0)


def apply_alignment_bias(points: np.ndarray, bias) -> np.ndarray:
    """One rigid perturbation: rotate by (roll, pitch, yaw) then translate."""
    b = np.asarray(bias, dtype=np.float64)
    R = rpy_to_matrix(b[..., 3], b[..., 4], b[..., 5])
    return np.einsum("...ij,...pj->...pi", R, np.asarray(points, dtype=np.float64)) + b[..., None, :3]


def pruning_probability(points: np.ndarray, prune_prob, z_ref) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    d = np.hypot(pts[..., 0], pts[..., 1])
    elev = np.abs(pts[..., 2] - np.asarray(z_ref, dtype=np.float64)[..., None])
    p0 = np.asarray(prune_prob, dtype=np.float64)[..., None]
    return np.clip(p0 * (d / PRUNE_DIST_MAX) * (elev / PRUNE_ELEV_MAX), 0.0, 1.0)


def pruning_keep_mask(points: np.ndarray, prune_prob, z_ref, seed=0, step=0) -> np.ndarray:
    p = pruning_probability(points, prune_prob, z_ref)
    u = hashed_uniform(points, seed, step, stream=3, n=1)[..., 0]
    # p == 1 must drop even the largest uniform
    return (u >= p) & (p < 1.0)


def apply_pruning(points: np.ndarray, prune_prob: float, z_ref: float, seed=0, step=0) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return pts[pruning_keep_mask(pts, prune_prob, z_ref, seed, step)]


def perturb_cloud(points: np.ndarray, cfg: PerturbationConfig, z_ref: float, seed=0, step=0) -> np.ndarray:
    """Full chain for one cloud: bias, noise model, tier noise, pruning."""
    pts = apply_alignment_bias(np.asarray(points, dtype=np.float64).reshape(-1, 3), cfg.bias)
    pts = apply_noise_model(pts, cfg, seed, step)
    pts = apply_tier_noise(pts, cfg.tier_amplitude, seed, step)
    return apply_pruning(pts, cfg.prune_prob, z_ref, seed, step)
