#!/usr/bin/env python3
"""Drive the surrogate robot with a hand-written trot and report speed, then
walk the same gait into a riser to show stumbling."""
import numpy as np

from mmloco.terrainsim import EnvConfig, VecEnv


def trot(t, lift=0.8, sweep=0.8, freq=2.5):
    a = np.zeros(12)
    for leg, phase in enumerate([0.0, np.pi, np.pi, 0.0]):
        w = 2 * np.pi * freq * t * 0.02 + phase
        a[3 * leg + 1] = sweep * np.cos(w)
        a[3 * leg + 2] = -lift * max(0.0, np.sin(w))
    return a


cfg = EnvConfig(n_envs=1, physics_randomization=False, extero_noise=False, proprio_noise=False, curriculum=False)
for sweep in (0.2, 0.4, 0.8):
    env = VecEnv(cfg, np.random.default_rng(0))
    vx = []
    for t in range(150):
        env.observe(privileged=False)
        env.step(trot(t, sweep=sweep)[None])
        vx.append(env.v_body[0, 0])
    print(f"sweep {sweep:.1f}: mean forward speed {np.mean(vx[50:]):.2f} m/s")

for rise in (0.0, 0.10, 0.27):
    env = VecEnv.stair_eval(cfg, [rise], 0.3, 1, np.random.default_rng(0))
    stumbles = 0
    for t in range(250):
        env.observe(privileged=False)
        stumbles += int(env.step(trot(t)[None])["stumble"].sum())
    print(f"rise {rise:.2f} m: base x {env.pos[0, 0]:.2f} m after 5 s, {stumbles} stumbles")
