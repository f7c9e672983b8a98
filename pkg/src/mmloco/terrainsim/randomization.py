"""Per-episode physical and sensing randomization."""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

PAYLOAD = (-1.0, 2.0)             # kg
KP_FACTOR = (0.9, 1.1)
KD_FACTOR = (0.9, 1.1)
MOTOR_STRENGTH = (0.9, 1.1)
COM_SHIFT = (-50.0, 50.0)         # mm, per axis
FRICTION = (0.2, 1.25)
DELAY_MS = (0.0, 15.0)

BIAS_RANGES = np.array([[-0.1, 0.1], [-0.1, 0.1], [-0.1, 0.1],      # x, y, z (m)
                        [-0.2, 0.2], [-0.15, 0.15], [-0.1, 0.1]])   # roll, pitch, yaw (rad)
NOISE_MEAN_HIGH = np.array([0.02, 0.02, 0.05])                        # m
NOISE_STD_HIGH = np.array([0.01, 0.01, 0.03])                         # m
TIER_PROBS = np.array([0.3, 0.5, 0.2])
TIER_BANDS = np.array([[0.0, 0.03], [0.03, 0.1], [0.1, 0.3]])        # m
PRUNE_PROB = (0.0, 1.0)


@dataclass
class EpisodeRandomization:
    """Struct of arrays; every field has leading dimension ``E``."""
    payload: np.ndarray
    kp_factor: np.ndarray
    kd_factor: np.ndarray
    motor_strength: np.ndarray
    com_shift: np.ndarray        # (E, 3) mm
    friction: np.ndarray
    delay_ms: np.ndarray
    bias: np.ndarray             # (E, 6)
    noise_mean: np.ndarray       # (E, 3) m
    noise_std: np.ndarray        # (E, 3) m
    tier: np.ndarray             # (E,) int in {0, 1, 2}
    tier_amplitude: np.ndarray   # (E,) m
    prune_prob: np.ndarray

    def __len__(self) -> int:
        return len(self.payload)

    @property
    def delay_substeps(self) -> np.ndarray:
        from .robot import SIM_DT
        return np.floor(self.delay_ms / (1000.0 * SIM_DT) + 1e-9).astype(np.int64)

    def assign(self, env_ids: np.ndarray, other: "EpisodeRandomization") -> None:
        for f in fields(self):
            getattr(self, f.name)[env_ids] = getattr(other, f.name)

    def physical_properties(self) -> np.ndarray:
        """(E, 8): friction, Kd factor, Kp factor, strength, payload, CoM xyz (m)."""
        return np.column_stack([self.friction, self.kd_factor, self.kp_factor, self.motor_strength,
                                self.payload, self.com_shift / 1000.0])


def randomize_episode(rng: np.random.Generator, n: int = 1, exteroception_noise: bool = True,
                      physics: bool = True) -> EpisodeRandomization:
    u = rng.uniform
    tier = rng.choice(3, size=n, p=TIER_PROBS)
    band = TIER_BANDS[tier]
    r = EpisodeRandomization(
        payload=u(*PAYLOAD, n), kp_factor=u(*KP_FACTOR, n), kd_factor=u(*KD_FACTOR, n),
        motor_strength=u(*MOTOR_STRENGTH, n), com_shift=u(*COM_SHIFT, (n, 3)),
        friction=u(*FRICTION, n), delay_ms=u(*DELAY_MS, n),
        bias=u(BIAS_RANGES[:, 0], BIAS_RANGES[:, 1], (n, 6)),
        noise_mean=u(0.0, 1.0, (n, 3)) * NOISE_MEAN_HIGH,
        noise_std=u(0.0, 1.0, (n, 3)) * NOISE_STD_HIGH,
        tier=tier, tier_amplitude=u(band[:, 0], band[:, 1]), prune_prob=u(*PRUNE_PROB, n),
    )
    if not physics:
        r.payload[:] = 0.0
        for name in ("kp_factor", "kd_factor", "motor_strength"):
            getattr(r, name)[:] = 1.0
        r.com_shift[:] = 0.0
        r.friction[:] = 1.0
        r.delay_ms[:] = 0.0
    if not exteroception_noise:
        for name in ("bias", "noise_mean", "noise_std", "tier_amplitude", "prune_prob"):
            getattr(r, name)[:] = 0.0
    return r
