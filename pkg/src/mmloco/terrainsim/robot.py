"""Go1-sized quadruped: joint limits, planar two-link leg kinematics and PD.

Leg order is FL, FR, RL, RR; joint order per leg is hip (abduction), thigh,
calf.  Feet are expressed in the body frame.
"""
from __future__ import annotations

import numpy as np

LEGS = ("FL", "FR", "RL", "RR")
THIGH_LEN = 0.2
CALF_LEN = 0.2
BODY_HALF_LEN = 0.19
HIP_HALF_WIDTH = 0.12
HIP_OFFSETS = np.array([[BODY_HALF_LEN, HIP_HALF_WIDTH, 0.0],
                        [BODY_HALF_LEN, -HIP_HALF_WIDTH, 0.0],
                        [-BODY_HALF_LEN, HIP_HALF_WIDTH, 0.0],
                        [-BODY_HALF_LEN, -HIP_HALF_WIDTH, 0.0]])
LEG_SIGN_X = np.array([1.0, 1.0, -1.0, -1.0])
LEG_SIGN_Y = np.array([1.0, -1.0, 1.0, -1.0])

NOMINAL_LEG = np.array([0.0, 0.8, -1.5])
NOMINAL_Q = np.tile(NOMINAL_LEG, 4)
Q_LOW = np.tile([-0.863, -0.686, -2.818], 4)
Q_HIGH = np.tile([0.863, 4.501, -0.888], 4)
TORQUE_LIMIT = np.tile([23.7, 23.7, 33.5], 4)

KP = 25.0
KD = 0.7
JOINT_INERTIA = 0.03
JOINT_DAMPING = 0.02
POLICY_DT = 0.02
SUBSTEPS = 4
SIM_DT = POLICY_DT / SUBSTEPS
ACTION_SCALE = 0.25
ROBOT_MASS = 13.0


def pd_torque(target, theta, theta_dot, kp_factor=1.0, kd_factor=1.0, strength=1.0) -> np.ndarray:
    """Clamped PD torque, scaled by the motor strength factor.

    Factors broadcast against ``(..., 12)`` joint arrays; pass per-env factors
    as ``(E, 1)``.
    """
    tau = KP * kp_factor * (target - theta) - KD * kd_factor * theta_dot
    return strength * np.clip(tau, -TORQUE_LIMIT, TORQUE_LIMIT)


def foot_positions(q: np.ndarray) -> np.ndarray:
    """Body-frame foot positions ``(..., 4, 3)`` for joint angles ``(..., 12)``."""
    q = q.reshape(q.shape[:-1] + (4, 3))
    hip, th, ca = q[..., 0], q[..., 1], q[..., 2]
    x = -(THIGH_LEN * np.sin(th) + CALF_LEN * np.sin(th + ca))
    zl = -(THIGH_LEN * np.cos(th) + CALF_LEN * np.cos(th + ca))
    # abduction swings the leg plane about the body x axis
    y = -zl * np.sin(hip)
    z = zl * np.cos(hip)
    return np.stack([x, y, z], axis=-1) + HIP_OFFSETS


NOMINAL_FEET = foot_positions(NOMINAL_Q)
NOMINAL_HEIGHT = float(-NOMINAL_FEET[0, 2])
