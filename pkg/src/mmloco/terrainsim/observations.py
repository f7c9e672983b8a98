"""Actor observation (45-D, noisy) and the critic's privileged bundle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .randomization import EpisodeRandomization
from .robot import NOMINAL_Q

OBS_DIM = 45
ANG_VEL_SCALE = 0.25
DOF_VEL_SCALE = 0.05
COMMAND_SCALE = np.array([2.0, 2.0, 0.25])

# uniform noise half-widths, applied before scaling
NOISE_JOINT_POS = 0.01
NOISE_JOINT_VEL = 1.5
NOISE_LIN_VEL = 0.1
NOISE_ANG_VEL = 0.2
NOISE_GRAVITY = 0.05

PRIVILEGED_GROUPS = {
    "gravity": 3,
    "lin_ang_vel": 6,
    "joint_pos_vel": 24,
    "external_wrench": 6,
    "physical_properties": 8,
    "foot_positions": 12,
}
PRIVILEGED_DIM = sum(PRIVILEGED_GROUPS.values())


@dataclass
class ProprioState:
    ang_vel: np.ndarray      # (E, 3)
    gravity: np.ndarray      # (E, 3)
    q: np.ndarray            # (E, 12)
    qd: np.ndarray           # (E, 12)
    v_body: np.ndarray       # (E, 3)
    feet: np.ndarray         # (E, 4, 3) body frame


def actor_observation(s: ProprioState, command, prev_action, rng: np.random.Generator | None,
                      noise: bool = True) -> np.ndarray:
    ang, grav, q, qd = s.ang_vel, s.gravity, s.q, s.qd
    if noise:
        u = rng.uniform
        ang = ang + u(-NOISE_ANG_VEL, NOISE_ANG_VEL, ang.shape)
        grav = grav + u(-NOISE_GRAVITY, NOISE_GRAVITY, grav.shape)
        q = q + u(-NOISE_JOINT_POS, NOISE_JOINT_POS, q.shape)
        qd = qd + u(-NOISE_JOINT_VEL, NOISE_JOINT_VEL, qd.shape)
    return np.concatenate([ang * ANG_VEL_SCALE, grav, np.asarray(command) * COMMAND_SCALE,
                           q - NOMINAL_Q, qd * DOF_VEL_SCALE, prev_action], axis=-1)


def noisy_velocity(v_body: np.ndarray, rng: np.random.Generator | None, noise: bool = True) -> np.ndarray:
    if not noise:
        return v_body.copy()
    return v_body + rng.uniform(-NOISE_LIN_VEL, NOISE_LIN_VEL, v_body.shape)


def privileged_state(s: ProprioState, rand: EpisodeRandomization) -> dict:
    E = s.q.shape[0]
    return {
        "gravity": s.gravity,
        "lin_ang_vel": np.concatenate([s.v_body * 2.0, s.ang_vel * ANG_VEL_SCALE], axis=-1),
        "joint_pos_vel": np.concatenate([s.q - NOMINAL_Q, s.qd * DOF_VEL_SCALE], axis=-1),
        # pushes are not simulated; the slot is kept so the layout matches the full bundle
        "external_wrench": np.zeros((E, 6)),
        "physical_properties": rand.physical_properties(),
        "foot_positions": s.feet.reshape(E, 12),
    }


def flatten_privileged(groups: dict) -> np.ndarray:
    return np.concatenate([groups[k] for k in PRIVILEGED_GROUPS], axis=-1)


def assemble_observation(s: ProprioState, command, prev_action, rand: EpisodeRandomization,
                         rng: np.random.Generator | None, noise: bool = True):
    """``(actor_obs (E, 45), privileged groups dict)``."""
    return actor_observation(s, command, prev_action, rng, noise), privileged_state(s, rand)
