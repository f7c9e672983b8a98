"""Evaluation protocols: velocity tracking, the stair flight and latent export."""
from __future__ import annotations

import csv
import dataclasses
import os

import numpy as np

from ..terrainsim.env import EnvConfig, VecEnv
from ..terrainsim.robot import POLICY_DT
from .rollout import policy_step

SCENARIOS = {
    "flat": ("rough", 0),
    "rough": ("rough", 6),
    "stairs-easy": ("stairs", 2),
    "stairs-hard": ("stairs", 8),
}


def scenario_env(cfg: EnvConfig, n_envs: int, rng: np.random.Generator, kind: str, level: int,
                 extero_noise: bool | None = None) -> VecEnv:
    """Envs pinned to one terrain kind and level, curriculum off."""
    ecfg = dataclasses.replace(cfg, n_envs=n_envs, kinds=(kind,), init_level_max=0, curriculum=False)
    if extero_noise is not None:
        ecfg.extero_noise = extero_noise
    env = VecEnv(ecfg, rng)
    env.curriculum.levels[:] = level
    env.reset(np.arange(n_envs))
    return env


def evaluate_tracking(model, cfg, seed: int = 0, n_envs: int = 256, steps: int = 250,
                      extero_noise: bool | None = None, level: int = 0) -> float:
    """Mean per-step linear-velocity tracking reward of the deterministic policy
    on level-``level`` rough terrain with commands from the initial range."""
    rng = np.random.default_rng(seed)
    env = scenario_env(cfg.env, n_envs, rng, "rough", level, extero_noise)
    total = 0.0
    for _ in range(steps):
        o = env.observe(privileged=False)
        p = policy_step(model, o, rng, p_boot=1.0, deterministic=True, with_value=False)
        info = env.step(p["actions"], v_odometry=p["v_hat"])
        total += float(info["terms"]["lin_vel_tracking"].mean())
    return total / steps


def evaluate_stairs(model, cfg, rises, run: float = 0.3, n_robots: int = 1000, time_limit: float = 10.0,
                    seed: int = 0) -> list[float]:
    """Fraction of robots per rise whose base reaches the last tread within ``time_limit`` s.

    Robots start 1 m before the first riser, commanded 1 m/s forward; a fall
    ends a robot's attempt.
    """
    steps = int(round(time_limit / POLICY_DT))
    rates = []
    for i, rise in enumerate(rises):
        rng = np.random.default_rng([seed, i])
        env = VecEnv.stair_eval(cfg.env, [float(rise)], run, n_robots, rng)
        for _ in range(steps):
            if not (env.alive & ~env.success).any():
                break
            o = env.observe(privileged=False)
            p = policy_step(model, o, rng, p_boot=1.0, deterministic=True, with_value=False)
            env.step(p["actions"], v_odometry=p["v_hat"])
        rates.append(float(env.success.mean()))
    return rates


def export_embeddings(model, cfg, scenario: str, steps: int, path: str | os.PathLike, seed: int = 0,
                      command=(0.5, 0.0, 0.0)) -> None:
    """One robot in ``scenario``; rows ``step, z_p..., z_e..., z_pe...`` (posterior means).

    The matching posterior standard deviations go to ``<path>.std.csv``.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; valid: {', '.join(SCENARIOS)}")
    kind, level = SCENARIOS[scenario]
    rng = np.random.default_rng(seed)
    env = scenario_env(cfg.env, 1, rng, kind, level)
    env.commands[:] = command
    ec = model.encoder.cfg
    header = (["step"] + [f"z_p_{i}" for i in range(ec.zp_dim)] + [f"z_e_{i}" for i in range(ec.ze_dim)]
              + [f"z_pe_{i}" for i in range(ec.zpe_dim)])
    with open(path, "w", newline="") as fm, open(str(path) + ".std.csv", "w", newline="") as fs:
        wm, ws = csv.writer(fm), csv.writer(fs)
        wm.writerow(header)
        ws.writerow(header)
        for t in range(steps):
            o = env.observe(privileged=False)
            p = policy_step(model, o, rng, p_boot=1.0, deterministic=True, with_value=False)
            ctx = p["ctx"]
            wm.writerow([t] + [repr(float(v)) for z in (ctx.z_p, ctx.z_e, ctx.z_pe) for v in z.mean.data[0]])
            ws.writerow([t] + [repr(float(v)) for z in (ctx.z_p, ctx.z_e, ctx.z_pe) for v in z.std.data[0]])
            env.step(p["actions"], v_odometry=p["v_hat"])
            if env.episode_step[0] == 0:
                env.commands[:] = command
