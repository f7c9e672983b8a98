"""Terrain level, command range and reward-weight schedules."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rewards import BASE_WEIGHTS, reward_anneal
from .terrain import N_LEVELS

PROMOTE_FRACTION = 0.5
DEMOTE_STREAK = 10
TRACKING_THRESHOLD = 0.9
VX_STEP = 0.25
VX_CAP = 2.0
VY_RANGE = (-0.5, 0.5)
YAW_RANGE = (-1.0, 1.0)


@dataclass
class CurriculumState:
    levels: np.ndarray
    fail_streak: np.ndarray
    vx_range: list = field(default_factory=lambda: [-1.0, 1.0])
    iteration: int = 0
    max_level: int = N_LEVELS - 1

    @classmethod
    def create(cls, n_envs: int, init_levels: np.ndarray | None = None, max_level: int = N_LEVELS - 1):
        lv = np.zeros(n_envs, dtype=np.int64) if init_levels is None else np.asarray(init_levels, dtype=np.int64).copy()
        return cls(lv, np.zeros(n_envs, dtype=np.int64), max_level=max_level)

    def reward_weights(self, velocity_tracking_scale: float = 1.0) -> dict:
        w = reward_anneal(BASE_WEIGHTS, self.iteration)
        w["lin_vel_tracking"] *= velocity_tracking_scale
        w["ang_vel_tracking"] *= velocity_tracking_scale
        return w


def curriculum_update(cs: CurriculumState, env_ids, fractions, mean_tracking: float | None,
                      rng: np.random.Generator) -> CurriculumState:
    """Apply one batch of finished episodes.

    ``fractions`` is the traversed distance over the tile length, per finished
    episode.  A success at the top level respawns the agent on a uniformly
    random level.
    """
    env_ids = np.asarray(env_ids, dtype=np.int64)
    frac = np.asarray(fractions, dtype=np.float64)
    top = cs.max_level
    for e, f in zip(env_ids, frac):
        if f > PROMOTE_FRACTION:
            cs.fail_streak[e] = 0
            if cs.levels[e] >= top:
                cs.levels[e] = rng.integers(0, top + 1)
            else:
                cs.levels[e] += 1
        else:
            cs.fail_streak[e] += 1
            if cs.fail_streak[e] > DEMOTE_STREAK:
                cs.levels[e] = max(cs.levels[e] - 1, 0)
                cs.fail_streak[e] = 0
    if mean_tracking is not None and mean_tracking >= TRACKING_THRESHOLD:
        cs.vx_range = [max(cs.vx_range[0] - VX_STEP, -VX_CAP), min(cs.vx_range[1] + VX_STEP, VX_CAP)]
    return cs


def sample_commands(cs: CurriculumState, rng: np.random.Generator, n: int) -> np.ndarray:
    return np.column_stack([rng.uniform(cs.vx_range[0], cs.vx_range[1], n),
                            rng.uniform(*VY_RANGE, n), rng.uniform(*YAW_RANGE, n)])
