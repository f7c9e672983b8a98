"""Vectorized surrogate quadruped environment.

There is no contact solver.  Joints are second-order systems under PD
torques; the base is carried by the legs that demand the highest support
(front/rear and left/right pairs), and its planar velocity relaxes toward
the contact-weighted backward sweep of the feet.  Feet driven into a riser
face below their clearance raise stumble events that slow or block progress.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from ..perception.geometry import POLICY_GRID, voxel_downsample_batch
from ..perception.memory import MEMORY_DEPTH, BatchedExteroMemory
from ..perception.perturb import (PerturbationConfig, apply_alignment_bias, apply_noise_model,
                                  apply_tier_noise, pruning_keep_mask)
from .curriculum import CurriculumState, curriculum_update, sample_commands
from .observations import (OBS_DIM, ProprioState, actor_observation, flatten_privileged,
                           noisy_velocity, privileged_state)
from .randomization import EpisodeRandomization, randomize_episode
from .rewards import RewardInputs, compute_rewards, weighted_total
from .robot import (ACTION_SCALE, BODY_HALF_LEN, HIP_HALF_WIDTH, JOINT_DAMPING, JOINT_INERTIA,
                    LEG_SIGN_X, LEG_SIGN_Y, NOMINAL_HEIGHT, NOMINAL_Q, POLICY_DT, Q_HIGH, Q_LOW,
                    ROBOT_MASS, SIM_DT, SUBSTEPS, foot_positions, pd_torque)
from .terrain import KINDS, TerrainBank, last_tread_x, sample_heightmap, stair_course

STUMBLE_MARGIN = 0.02       # m of riser above the previous foot height that counts as a hit
CLIMB_DEPTH = 0.15          # m; shallower hits are dragged over, deeper ones block
STUMBLE_ATTENUATION = 0.3
VELOCITY_TAU = 0.1          # s
CONTACT_OFFSET = 0.0        # m
CONTACT_SOFTNESS = 0.002    # m
HEIGHT_SMOOTHING = 0.5      # per-substep blend toward the support height
TRACTION_REF = 0.4          # friction at which traction saturates
FALL_ANGLE = 1.0            # rad
FALL_CLEARANCE = 0.10       # m
CAPTURE_EVERY = 5           # policy steps per exteroceptive capture (10 Hz)
HISTORY = 5


@dataclass
class EnvConfig:
    n_envs: int = 256
    kinds: tuple = ("rough",)
    init_level_max: int = 0
    curriculum: bool = True
    episode_steps: int = 1000
    proprio_noise: bool = True
    extero_noise: bool = True
    physics_randomization: bool = True
    n_points: int = 64
    memory_depth: int = MEMORY_DEPTH
    velocity_tracking_scale: float = 1.0
    terrain_variants: int = 2
    terrain_seed: int = 0


def _rot_z(yaw):
    c, s = np.cos(yaw), np.sin(yaw)
    return c, s


def _rpy_matrix(rpy: np.ndarray) -> np.ndarray:
    from ..perception.geometry import rpy_to_matrix
    return rpy_to_matrix(rpy[:, 0], rpy[:, 1], rpy[:, 2])


class VecEnv:
    """``E`` independent robots stepped in lockstep with one random stream."""

    def __init__(self, cfg: EnvConfig, rng: np.random.Generator, bank: TerrainBank | None = None,
                 table: np.ndarray | None = None):
        self.cfg = cfg
        self.rng = rng
        if bank is None:
            bank, table = TerrainBank.curriculum(tuple(cfg.kinds), cfg.terrain_variants, cfg.terrain_seed)
        self.bank, self.table = bank, table
        E = cfg.n_envs
        self.n = E
        self.curriculum = CurriculumState.create(
            E, rng.integers(0, cfg.init_level_max + 1, E) if cfg.init_level_max > 0 else None)
        self.rand = randomize_episode(rng, E, cfg.extero_noise, cfg.physics_randomization)
        cells = POLICY_GRID.cell_centers().reshape(-1, 2)
        self.scan_xy = cells
        self.memory = BatchedExteroMemory(E, len(cells), cfg.memory_depth)
        self.fill_point = np.array([POLICY_GRID.forward_offset, 0.0, -NOMINAL_HEIGHT])
        self.eval_mode = False
        self.goal_x = None
        self._cached_obs = None
        self._alloc()
        self.reset(np.arange(E))
        # stagger episode ends
        self.episode_step[:] = rng.integers(0, cfg.episode_steps, E)
        self.events: list[tuple[int, int, str, float, float]] = []
        self.global_step = 0

    # ------------------------------------------------------------------ state
    def _alloc(self):
        E = self.n
        self.fid = np.zeros(E, dtype=np.int64)
        self.kind_idx = np.zeros(E, dtype=np.int64)
        self.pos = np.zeros((E, 3))
        self.rpy = np.zeros((E, 3))
        self.v_body = np.zeros((E, 3))
        self.yaw_rate = np.zeros(E)
        self.ang_vel = np.zeros((E, 3))
        self.q = np.tile(NOMINAL_Q, (E, 1))
        self.qd = np.zeros((E, 12))
        self.qdd = np.zeros((E, 12))
        self.torque = np.zeros((E, 12))
        self.actions = np.zeros((E, 3, 12))           # a_t, a_{t-1}, a_{t-2}
        self.target_hist = np.tile(NOMINAL_Q, (E, 4, 1))
        self.episode_step = np.zeros(E, dtype=np.int64)
        self.start_xy = np.zeros((E, 2))
        self.commands = np.zeros((E, 3))
        self.episode_return = np.zeros(E)
        self.episode_tracking = np.zeros(E)
        self.episode_seed = np.zeros(E, dtype=np.int64)
        self.odo_pos = np.zeros((E, 3))
        self.stack = np.zeros((E, HISTORY + 1, OBS_DIM))
        self.foot_world = np.zeros((E, 4, 3))
        self.foot_ground_z = np.zeros((E, 4))
        self.feet = np.tile(foot_positions(NOMINAL_Q), (E, 1, 1))
        self.alive = np.ones(E, dtype=bool)
        self.success = np.zeros(E, dtype=bool)

    def reset(self, env_ids: np.ndarray) -> None:
        ids = np.asarray(env_ids, dtype=np.int64)
        if len(ids) == 0:
            return
        rng, cfg, k = self.rng, self.cfg, len(ids)
        if not self.eval_mode:
            kind = rng.integers(0, len(cfg.kinds), k)
            variant = rng.integers(0, self.table.shape[2], k)
            self.kind_idx[ids] = kind
            self.fid[ids] = self.table[kind, self.curriculum.levels[ids], variant]
            self.pos[ids, :2] = 0.5 * self.bank.size
            self.rpy[ids] = 0.0
            self.rpy[ids, 2] = rng.uniform(-np.pi, np.pi, k)
            self.commands[ids] = sample_commands(self.curriculum, rng, k)
        self.rand.assign(ids, randomize_episode(rng, k, cfg.extero_noise, cfg.physics_randomization))
        self.v_body[ids] = 0.0
        self.yaw_rate[ids] = 0.0
        self.ang_vel[ids] = 0.0
        self.q[ids] = NOMINAL_Q
        self.qd[ids] = 0.0
        self.qdd[ids] = 0.0
        self.torque[ids] = 0.0
        self.actions[ids] = 0.0
        self.target_hist[ids] = NOMINAL_Q
        self.feet[ids] = foot_positions(NOMINAL_Q)
        ground = self.bank.height(self.fid[ids], self.pos[ids, 0], self.pos[ids, 1])
        self.pos[ids, 2] = ground + NOMINAL_HEIGHT
        self.episode_step[ids] = 0
        self.start_xy[ids] = self.pos[ids, :2]
        self.episode_return[ids] = 0.0
        self.episode_tracking[ids] = 0.0
        self.episode_seed[ids] = rng.integers(0, 2**62, k)
        self.odo_pos[ids] = self.pos[ids]
        self.memory.reset(ids)
        self.stack[ids] = 0.0
        self._update_feet_world(ids)
        self.foot_ground_z[ids] = self.foot_world[ids, :, 2]
        self.alive[ids] = True
        self.success[ids] = False

    # ------------------------------------------------------------- geometry
    def _update_feet_world(self, ids=slice(None)):
        R = _rpy_matrix(self.rpy[ids])
        self.foot_world[ids] = self.feet[ids] @ np.swapaxes(R, -1, -2) + self.pos[ids, None, :]

    def ground_under_base(self) -> np.ndarray:
        return self.bank.height(self.fid, self.pos[:, 0], self.pos[:, 1])

    def proprio_state(self) -> ProprioState:
        R = _rpy_matrix(self.rpy)
        gravity = -R[:, 2, :]
        return ProprioState(self.ang_vel.copy(), gravity, self.q.copy(), self.qd.copy(),
                            self.v_body.copy(), self.feet.copy())

    # ------------------------------------------------------------- dynamics
    def _substep(self, target: np.ndarray, stumbled: np.ndarray, events: dict) -> None:
        r = self.rand
        E = self.n
        self.target_hist[:, 1:] = self.target_hist[:, :-1]
        self.target_hist[:, 0] = target
        applied = self.target_hist[np.arange(E), np.minimum(r.delay_substeps, 3)]
        tau = pd_torque(applied, self.q, self.qd, r.kp_factor[:, None], r.kd_factor[:, None],
                        r.motor_strength[:, None])
        qdd = (tau - JOINT_DAMPING * self.qd) / JOINT_INERTIA
        qd = self.qd + qdd * SIM_DT
        q = self.q + qd * SIM_DT
        hit_lo, hit_hi = q < Q_LOW, q > Q_HIGH
        q = np.clip(q, Q_LOW, Q_HIGH)
        qd = np.where((hit_lo & (qd < 0)) | (hit_hi & (qd > 0)), 0.0, qd)
        self.qdd = (qd - self.qd) / SIM_DT
        self.q, self.qd, self.torque = q, qd, tau

        feet_prev = self.feet
        feet = foot_positions(q)
        self.feet = feet
        foot_vel = (feet - feet_prev) / SIM_DT                       # body frame, (E, 4, 3)

        c, s = _rot_z(self.rpy[:, 2])
        wx = self.pos[:, 0, None] + c[:, None] * feet[..., 0] - s[:, None] * feet[..., 1]
        wy = self.pos[:, 1, None] + s[:, None] * feet[..., 0] + c[:, None] * feet[..., 1]
        ground = self.bank.height(self.fid[:, None], wx, wy)      # (E, 4)

        # riser hits: the ground under the foot jumped above where the foot was
        depth = ground - self.foot_ground_z
        hit = depth > STUMBLE_MARGIN
        blocked = hit & (depth >= CLIMB_DEPTH)
        ground = np.where(blocked, self.foot_ground_z, ground)
        any_hit = hit.any(axis=1)
        any_block = blocked.any(axis=1)
        events["stumble"] |= any_hit
        events["blocked"] |= any_block

        ext = -feet[..., 2]
        sup = ground + ext                                           # base height each leg asks for
        front = np.maximum(sup[:, 0], sup[:, 1])
        rear = np.maximum(sup[:, 2], sup[:, 3])
        left = np.maximum(sup[:, 0], sup[:, 2])
        right = np.maximum(sup[:, 1], sup[:, 3])
        z_t = 0.25 * (front + rear + left + right)
        px, py = 0.5 * (front - rear), 0.5 * (left - right)
        plane = z_t[:, None] + px[:, None] * LEG_SIGN_X + py[:, None] * LEG_SIGN_Y
        contact = 1.0 / (1.0 + np.exp(-np.clip((sup - plane + CONTACT_OFFSET) / CONTACT_SOFTNESS, -60, 60)))
        com = r.com_shift[:, None, :2] / 1000.0
        rxy = feet[..., :2]
        load = np.clip(1.0 + np.sum(com * rxy, axis=-1) / np.sum(rxy ** 2, axis=-1), 0.5, 1.5)
        w = contact * load
        wsum = np.maximum(w.sum(axis=1), 1e-6)
        traction = np.minimum(1.0, r.friction / TRACTION_REF)
        v_target = -np.einsum("ek,eki->ei", w, foot_vel[..., :2]) / wsum[:, None] * traction[:, None]
        cross = rxy[..., 0] * foot_vel[..., 1] - rxy[..., 1] * foot_vel[..., 0]
        yaw_target = -np.sum(w * cross, axis=1) / np.maximum(np.sum(w * np.sum(rxy ** 2, -1), 1), 1e-6)
        yaw_target *= traction

        tau_v = VELOCITY_TAU * (1.0 + r.payload / ROBOT_MASS)
        a = SIM_DT / tau_v
        self.v_body[:, :2] += a[:, None] * (v_target - self.v_body[:, :2])
        self.yaw_rate += a * (yaw_target - self.yaw_rate)
        new_hit = any_hit & ~stumbled
        self.v_body[new_hit, :2] *= STUMBLE_ATTENUATION
        stumbled |= any_hit
        self.v_body[any_block, :2] = 0.0

        dx = c * self.v_body[:, 0] - s * self.v_body[:, 1]
        dy = s * self.v_body[:, 0] + c * self.v_body[:, 1]
        self.pos[:, 0] += dx * SIM_DT
        self.pos[:, 1] += dy * SIM_DT
        self.rpy[:, 2] = np.mod(self.rpy[:, 2] + self.yaw_rate * SIM_DT + np.pi, 2 * np.pi) - np.pi
        self.pos[:, 2] += HEIGHT_SMOOTHING * (z_t - self.pos[:, 2])
        self.rpy[:, 1] = np.arctan2(-2.0 * px, 2.0 * BODY_HALF_LEN)
        self.rpy[:, 0] = np.arctan2(2.0 * py, 2.0 * HIP_HALF_WIDTH)

        # foot heights for the next riser test: supported feet sit on the ground
        self._update_feet_world()
        self.foot_ground_z = np.maximum(self.foot_world[..., 2], ground)

    def step(self, actions: np.ndarray, v_odometry: np.ndarray | None = None) -> dict:
        """Advance one policy step; returns rewards, terms, done flags and events."""
        E = self.n
        self._cached_obs = None
        actions = np.asarray(actions, dtype=np.float64)
        fault = ~np.all(np.isfinite(actions), axis=1)
        actions = np.where(fault[:, None], 0.0, actions)
        self.actions[:, 2] = self.actions[:, 1]
        self.actions[:, 1] = self.actions[:, 0]
        self.actions[:, 0] = actions
        target = NOMINAL_Q + ACTION_SCALE * actions

        pos0, rpy0 = self.pos.copy(), self.rpy.copy()
        feet_world0 = self.foot_world.copy()
        events = {"stumble": np.zeros(E, dtype=bool), "blocked": np.zeros(E, dtype=bool)}
        stumbled = np.zeros(E, dtype=bool)
        qdd_sq = np.zeros((E, 12))
        tau_abs = np.zeros((E, 12))
        for _ in range(SUBSTEPS):
            self._substep(target, stumbled, events)
            qdd_sq += self.qdd ** 2
            tau_abs += np.abs(self.torque)

        c0, s0 = _rot_z(rpy0[:, 2])
        dpos = (self.pos - pos0) / POLICY_DT
        # body-frame linear velocity including the vertical rate
        self.v_body[:, 2] = dpos[:, 2]
        self.ang_vel[:, 0] = (self.rpy[:, 0] - rpy0[:, 0]) / POLICY_DT
        self.ang_vel[:, 1] = (self.rpy[:, 1] - rpy0[:, 1]) / POLICY_DT
        self.ang_vel[:, 2] = self.yaw_rate

        ground_base = self.ground_under_base()
        foot_ground = self.bank.height(self.fid[:, None], self.foot_world[..., 0], self.foot_world[..., 1])
        foot_h = np.maximum(self.foot_world[..., 2] - foot_ground, 0.0)
        foot_speed = np.linalg.norm(self.foot_world[..., :2] - feet_world0[..., :2], axis=-1) / POLICY_DT
        st = self.proprio_state()
        terms = compute_rewards(RewardInputs(
            v_body=self.v_body, ang_vel=self.ang_vel, gravity=st.gravity, qd=self.qd,
            qdd=np.sqrt(qdd_sq / SUBSTEPS), torque=tau_abs / SUBSTEPS * np.sign(self.torque),
            base_height=self.pos[:, 2] - ground_base, foot_height=foot_h, foot_speed_xy=foot_speed,
            action=self.actions[:, 0], prev_action=self.actions[:, 1],
            prev_prev_action=self.actions[:, 2]), self.commands)
        weights = self.curriculum.reward_weights(self.cfg.velocity_tracking_scale)
        reward = weighted_total(terms, weights)

        # odometry: true orientation, integrated velocity estimate
        v_odo = self.v_body if v_odometry is None else np.asarray(v_odometry)
        R = _rpy_matrix(self.rpy)
        self.odo_pos += (R @ v_odo[..., None])[..., 0] * POLICY_DT

        self.episode_step += 1
        fell = ((np.abs(self.rpy[:, 0]) > FALL_ANGLE) | (np.abs(self.rpy[:, 1]) > FALL_ANGLE)
                | (self.pos[:, 2] < ground_base + FALL_CLEARANCE))
        timeout = self.episode_step >= self.cfg.episode_steps
        done = fell | timeout | fault
        self.episode_return += reward
        self.episode_tracking += terms["lin_vel_tracking"]

        next_clean = actor_observation(st, self.commands, self.actions[:, 0], None, noise=False)
        info = {"reward": reward, "terms": terms, "done": done, "timeout": timeout & ~fell & ~fault,
                "fell": fell, "fault": fault, "stumble": events["stumble"], "blocked": events["blocked"],
                "next_obs_clean": next_clean, "v_true": self.v_body.copy(), "episodes": None}
        for kind in ("stumble", "fell", "fault"):
            src = events["stumble"] if kind == "stumble" else info[kind]
            for e in np.flatnonzero(src)[:64]:
                self.events.append((self.global_step, int(e), kind, float(self.pos[e, 0]), float(self.pos[e, 1])))
        del self.events[:-10000]
        self.global_step += 1

        if self.eval_mode:
            reached = self.alive & (self.pos[:, 0] >= self.goal_x)
            self.success |= reached
            self.alive &= ~(fell | fault)
            return info

        ids = np.flatnonzero(done)
        if len(ids):
            disp = np.linalg.norm(self.pos[ids, :2] - self.start_xy[ids], axis=1)
            steps = np.maximum(self.episode_step[ids], 1)
            info["episodes"] = {"returns": self.episode_return[ids].copy(),
                                "tracking": self.episode_tracking[ids] / steps,
                                "fraction": disp / self.bank.size,
                                "levels": self.curriculum.levels[ids].copy()}
            if self.cfg.curriculum:
                curriculum_update(self.curriculum, ids, disp / self.bank.size, None, self.rng)
            self.reset(ids)
        return info

    # -------------------------------------------------------- exteroception
    def capture(self, force: bool = False) -> None:
        """Record a new cloud for every env whose 10 Hz slot is due."""
        due = np.flatnonzero(force | (self.episode_step % CAPTURE_EVERY == 0))
        if len(due) == 0:
            return
        R = _rpy_matrix(self.rpy[due])
        c, s = _rot_z(self.rpy[due, 2])
        off = self.scan_xy
        wx = self.pos[due, 0, None] + c[:, None] * off[:, 0] - s[:, None] * off[:, 1]
        wy = self.pos[due, 1, None] + s[:, None] * off[:, 0] + c[:, None] * off[:, 1]
        wz = self.bank.height(self.fid[due, None], wx, wy)
        world = np.stack([wx, wy, wz], axis=-1) - self.pos[due, None, :]
        pts = world @ R
        r = self.rand
        seed, step = self.episode_seed[due, None], self.episode_step[due, None]
        pts = apply_alignment_bias(pts, r.bias[due])
        pts = apply_noise_model(pts, PerturbationConfig(r.noise_mean[due], r.noise_std[due]), seed, step)
        pts = apply_tier_noise(pts, r.tier_amplitude[due], seed, step)
        keep = pruning_keep_mask(pts, r.prune_prob[due], np.full(len(due), -NOMINAL_HEIGHT), seed, step)
        self.memory.push(due, pts, keep, R, self.odo_pos[due])

    def policy_points(self) -> tuple[np.ndarray, np.ndarray]:
        R = _rpy_matrix(self.rpy)
        pts, valid = self.memory.assemble(R, self.odo_pos)
        return voxel_downsample_batch(pts, valid, POLICY_GRID.leaf, self.cfg.n_points, self.fill_point)

    def observe(self, privileged: bool = True) -> dict:
        """Everything the learner needs at the current step.

        Repeated calls between two ``step`` calls return the same arrays, so
        the trainer can peek at the final state of a rollout.
        """
        out = self._cached_obs
        if out is None:
            self.capture()
            st = self.proprio_state()
            noise = self.cfg.proprio_noise
            obs = actor_observation(st, self.commands, self.actions[:, 0], self.rng, noise)
            fresh = self.episode_step == 0
            self.stack[:, 1:] = self.stack[:, :-1]
            self.stack[fresh, 1:] = 0.0
            self.stack[:, 0] = obs
            points, weights = self.policy_points()
            out = {"obs": obs, "stack": self.stack.copy(), "points": points, "weights": weights,
                   "v_true": st.v_body, "v_noisy": noisy_velocity(st.v_body, self.rng, noise),
                   "command": self.commands.copy()}
            self._cached_obs = out
        if privileged and "heights" not in out:
            out["privileged"] = flatten_privileged(privileged_state(self.proprio_state(), self.rand))
            out["heights"] = sample_heightmap(self.bank, self.fid, self.pos[:, :2], self.rpy[:, 2],
                                              self.pos[:, 2])
        return out

    # ---------------------------------------------------------- evaluation
    @classmethod
    def stair_eval(cls, cfg: EnvConfig, rises: list[float], run: float, robots: int,
                   rng: np.random.Generator, goal_steps: int = 8) -> "VecEnv":
        """``robots`` envs per rise on a straight flight, commanded 1 m/s forward."""
        bank = TerrainBank([stair_course(r, run, goal_steps) for r in rises])
        table = np.arange(len(rises)).reshape(1, len(rises), 1)
        cfg = EnvConfig(**{**cfg.__dict__, "n_envs": robots * len(rises), "curriculum": False,
                           "kinds": ("stairs",), "init_level_max": 0})
        env = cls.__new__(cls)
        env.cfg, env.rng, env.bank, env.table, env.n = cfg, rng, bank, table, cfg.n_envs
        env.curriculum = CurriculumState.create(cfg.n_envs)
        env.rand = randomize_episode(rng, cfg.n_envs, cfg.extero_noise, cfg.physics_randomization)
        env.scan_xy = POLICY_GRID.cell_centers().reshape(-1, 2)
        env.memory = BatchedExteroMemory(cfg.n_envs, len(env.scan_xy), cfg.memory_depth)
        env.fill_point = np.array([POLICY_GRID.forward_offset, 0.0, -NOMINAL_HEIGHT])
        env.eval_mode = True
        env._cached_obs = None
        env.goal_x = last_tread_x(run, goal_steps)
        env._alloc()
        env.fid[:] = np.repeat(np.arange(len(rises)), robots)
        env.pos[:, 0] = 1.0
        env.pos[:, 1] = 0.5 * bank.size + rng.uniform(-0.5, 0.5, cfg.n_envs)
        env.rpy[:] = 0.0
        env.commands[:] = [1.0, 0.0, 0.0]
        env.reset(np.arange(cfg.n_envs))
        env.events = []
        env.global_step = 0
        return env

    def write_event_log(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "env", "event", "x", "y"])
            w.writerows(self.events)
