"""Surrogate terrain simulator: robot model, terrain tiles, rewards, curriculum."""
from .curriculum import CurriculumState, curriculum_update, sample_commands
from .env import EnvConfig, VecEnv
from .observations import (OBS_DIM, PRIVILEGED_DIM, PRIVILEGED_GROUPS, ProprioState,
                           actor_observation, assemble_observation, flatten_privileged,
                           noisy_velocity, privileged_state)
from .randomization import EpisodeRandomization, randomize_episode
from .rewards import (BASE_WEIGHTS, RewardInputs, compute_rewards, default_weights, reward_anneal,
                      weighted_total)
from .robot import NOMINAL_HEIGHT, NOMINAL_Q, foot_positions, pd_torque
from .terrain import (KINDS, N_LEVELS, TerrainBank, TerrainField, export_heightfield_csv,
                      generate_terrain, height_at, last_tread_x, sample_heightmap,
                      sample_privileged_heightmap, stair_course)
