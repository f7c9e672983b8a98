"""Reward terms and weights.

Every term is returned unweighted; ``weighted_total`` applies the current
(annealed) weights.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .robot import NOMINAL_HEIGHT

FOOT_CLEARANCE_TARGET = 0.08   # m
ANNEAL_RATE = 0.998

BASE_WEIGHTS = {
    "lin_vel_tracking": 1.0,
    "ang_vel_tracking": 0.5,
    "lin_vel_z": -2.0,
    "ang_vel_xy": -0.05,
    "uprightness": -0.2,
    "joint_acc": -2.5e-7,
    "joint_power": -2e-5,
    "body_height": -1.0,
    "foot_clearance": -0.01,
    "action_rate": -0.01,
    "smoothness": -0.01,
    "power_distribution": -1e-5,
    "joint_torque": 0.0,
    "joint_vel": 0.0,
}
# initial weights of the annealed style terms; these replace the base weights above
ANNEALED_W0 = {
    "joint_torque": -5e-6,
    "joint_vel": -6e-6,
    "joint_acc": -7.5e-8,
    "action_rate": -1.5e-5,
    "smoothness": -1.5e-5,
}
TERMS = tuple(BASE_WEIGHTS)


@dataclass
class RewardInputs:
    v_body: np.ndarray          # (E, 3)
    ang_vel: np.ndarray         # (E, 3)
    gravity: np.ndarray         # (E, 3) projected into the body frame
    qd: np.ndarray              # (E, 12)
    qdd: np.ndarray             # (E, 12)
    torque: np.ndarray          # (E, 12)
    base_height: np.ndarray     # (E,) above the ground under the base
    foot_height: np.ndarray     # (E, 4) above the ground under each foot
    foot_speed_xy: np.ndarray   # (E, 4) world-frame horizontal foot speed
    action: np.ndarray          # (E, 12) a_t
    prev_action: np.ndarray     # a_{t-1}
    prev_prev_action: np.ndarray  # a_{t-2}


def compute_rewards(s: RewardInputs, command: np.ndarray, height_target: float = NOMINAL_HEIGHT) -> dict:
    cmd = np.asarray(command, dtype=np.float64)
    lin_err = np.sum((cmd[..., :2] - s.v_body[..., :2]) ** 2, axis=-1)
    tp = s.torque * s.qd
    return {
        "lin_vel_tracking": np.exp(-4.0 * lin_err),
        "ang_vel_tracking": np.exp(-4.0 * (cmd[..., 2] - s.ang_vel[..., 2]) ** 2),
        "lin_vel_z": s.v_body[..., 2] ** 2,
        "ang_vel_xy": np.sum(s.ang_vel[..., :2] ** 2, axis=-1),
        "uprightness": np.sum(s.gravity[..., :2] ** 2, axis=-1),
        "joint_acc": np.sum(s.qdd ** 2, axis=-1),
        "joint_power": np.sum(np.abs(s.torque) * np.abs(s.qd), axis=-1),
        "body_height": (height_target - s.base_height) ** 2,
        "foot_clearance": np.sum((FOOT_CLEARANCE_TARGET - s.foot_height) ** 2 * s.foot_speed_xy, axis=-1),
        "action_rate": np.sum((s.action - s.prev_action) ** 2, axis=-1),
        "smoothness": np.sum((s.action - 2.0 * s.prev_action + s.prev_prev_action) ** 2, axis=-1),
        "power_distribution": np.var(tp, axis=-1) ** 2,
        "joint_torque": np.sum(s.torque ** 2, axis=-1),
        "joint_vel": np.sum(s.qd ** 2, axis=-1),
    }


def reward_anneal(weights: dict, iteration: int) -> dict:
    """``w_i = w0 * 0.998**i`` for the annealed terms; the rest pass through."""
    if iteration < 0:
        raise ValueError("reward_anneal: iteration must be >= 0")
    out = dict(weights)
    factor = ANNEAL_RATE ** iteration
    for k, w0 in ANNEALED_W0.items():
        out[k] = w0 * factor
    return out


def default_weights(velocity_tracking_scale: float = 1.0) -> dict:
    w = reward_anneal(BASE_WEIGHTS, 0)
    w["lin_vel_tracking"] *= velocity_tracking_scale
    w["ang_vel_tracking"] *= velocity_tracking_scale
    return w


def weighted_total(terms: dict, weights: dict) -> np.ndarray:
    return sum(weights[k] * terms[k] for k in TERMS)
