"""Exteroception preprocessing, short-term point memory and perturbations."""
from .geometry import (POLICY_GRID, PRIVILEGED_GRID, SE3, VoxelGridSpec, grid_select,
                       rpy_to_matrix, se3_apply, se3_compose, se3_inverse, voxel_downsample,
                       voxel_downsample_batch)
from .memory import MEMORY_DEPTH, BatchedExteroMemory, ExteroMemory, memory_assemble
from .perturb import (PerturbationConfig, apply_alignment_bias, apply_noise_model, apply_pruning,
                      apply_tier_noise, hashed_normal, hashed_uniform, perturb_cloud,
                      pruning_keep_mask, pruning_probability)
from .replay import read_replay, write_replay
