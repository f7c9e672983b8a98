#!/usr/bin/env python3
"""Walk a synthetic step through the exteroceptive pipeline.

A robot moving forward captures a step edge three times.  Each capture is
perturbed, stored with its pose, re-expressed in the current body frame,
voxel filtered and binned into the policy height grid.
"""
import numpy as np

from mmloco.perception import (POLICY_GRID, SE3, ExteroMemory, PerturbationConfig, grid_select,
                               memory_assemble, perturb_cloud, se3_apply, se3_inverse, voxel_downsample)

rng = np.random.default_rng(0)
xs, ys = np.meshgrid(np.linspace(0.3, 1.4, 45), np.linspace(-0.55, 0.55, 23))
world = np.column_stack([xs.ravel(), ys.ravel(), np.where(xs.ravel() > 0.9, 0.12, 0.0)])

profile = PerturbationConfig(noise_mean=np.array([0.0, 0.0, 0.01]), noise_std=np.array([0.005, 0.005, 0.01]),
                             prune_prob=0.3, tier_amplitude=0.02)
mem = ExteroMemory(3)
for k in range(3):
    pose = SE3.from_rpy(0.0, 0.0, 0.0, [0.05 * k, 0.0, 0.3])
    body = se3_apply(se3_inverse(pose), world)
    mem.push(perturb_cloud(body, profile, z_ref=-0.3, seed=1, step=k), pose)
    print(f"capture {k}: {len(body)} points in, {len(mem.entries[-1][0])} kept")

now = SE3.from_rpy(0.0, 0.0, 0.0, [0.1, 0.0, 0.3])
merged = memory_assemble(mem, now)
sparse = voxel_downsample(merged, POLICY_GRID.leaf)
heights, occupied = grid_select(sparse, POLICY_GRID)
print(f"memory {len(merged)} points, {len(sparse)} voxels, {occupied.mean():.0%} of cells observed")
np.set_printoptions(precision=2, suppress=True, linewidth=150)
print("height grid, far row first (body frame z):")
print(np.where(occupied, heights, np.nan))
