import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmloco.terrainsim import (BASE_WEIGHTS, KINDS, N_LEVELS, NOMINAL_HEIGHT, NOMINAL_Q,
                               PRIVILEGED_GROUPS, CurriculumState, EnvConfig, ProprioState,
                               RewardInputs, TerrainBank, VecEnv, actor_observation,
                               compute_rewards, curriculum_update, foot_positions,
                               generate_terrain, pd_torque, privileged_state, randomize_episode,
                               reward_anneal, sample_heightmap, stair_course)
from mmloco.terrainsim import curriculum as C
from mmloco.terrainsim import randomization as R
from mmloco.terrainsim.observations import (NOISE_ANG_VEL, NOISE_GRAVITY, NOISE_JOINT_POS,
                                            NOISE_JOINT_VEL, PRIVILEGED_DIM)
from mmloco.terrainsim.rewards import ANNEALED_W0, FOOT_CLEARANCE_TARGET
from mmloco.terrainsim.robot import TORQUE_LIMIT
from mmloco.terrainsim.terrain import last_tread_x, rough_amplitude, stair_rise

# 0.998**500 and exp(-1), evaluated at 30 digits
ANNEAL_500 = 0.367511254857158905522103643592
EXP_M1 = 0.367879441171442321595523770161


def trot(t, amp=0.8, sweep=0.8, freq=2.5):
    """Diagonal-pair gait: thigh sweep plus calf fold during the swing half."""
    a = np.zeros(12)
    for leg, ph in enumerate([0.0, np.pi, np.pi, 0.0]):
        w = 2 * np.pi * freq * t * 0.02 + ph
        a[3 * leg + 1] = sweep * np.cos(w)
        a[3 * leg + 2] = -amp * max(0.0, np.sin(w))
    return a


def quiet_env(n=4, seed=0, **kw):
    cfg = EnvConfig(n_envs=n, physics_randomization=False, extero_noise=False, proprio_noise=False,
                    curriculum=False, **kw)
    env = VecEnv(cfg, np.random.default_rng(seed))
    env.episode_step[:] = 0
    return env


# ---- robot -----------------------------------------------------------------------

def test_pd_torque_examples():
    q = NOMINAL_Q.copy()
    assert np.all(pd_torque(q, q, np.zeros(12)) == 0.0)
    tau = pd_torque(q + 0.1, q, np.zeros(12))
    np.testing.assert_allclose(tau, 2.5, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(pd_torque(q + 100.0, q, np.zeros(12)), TORQUE_LIMIT)


def test_nominal_stance_geometry():
    feet = foot_positions(NOMINAL_Q)
    assert feet.shape == (4, 3)
    np.testing.assert_allclose(-feet[:, 2], NOMINAL_HEIGHT, atol=1e-12)
    # thigh 0.8, calf -1.5 with 0.2 m links
    expect = 0.2 * math.cos(0.8) + 0.2 * math.cos(-0.7)
    assert abs(NOMINAL_HEIGHT - expect) < 1e-12


# ---- dynamics ---------------------------------------------------------------------

def test_zero_action_equilibrium():
    env = quiet_env()
    start = env.pos.copy()
    for _ in range(100):
        env.observe()
        env.step(np.zeros((4, 12)))
    assert np.abs(env.pos - start).max() < 1e-3


def test_scripted_trot_moves_forward():
    env = quiet_env()
    vx = []
    for t in range(150):
        env.observe()
        info = env.step(np.tile(trot(t), (4, 1)))
        vx.append(env.v_body[:, 0].mean())
        assert not info["fell"].any()
    assert np.mean(vx[50:]) > 0.2


def test_riser_without_clearance_stumbles():
    # the same low-clearance trot (calf fold lifts the feet a few cm) on flat
    # ground and into a 0.27 m riser
    def run(rise):
        cfg = EnvConfig(n_envs=2, physics_randomization=False, extero_noise=False, proprio_noise=False)
        env = VecEnv.stair_eval(cfg, [rise], 0.3, 2, np.random.default_rng(0))
        stumbles = 0
        for t in range(250):
            env.observe(privileged=False)
            info = env.step(np.tile(trot(t), (2, 1)))
            stumbles += int(info["stumble"].sum())
        return env.pos[:, 0].mean(), stumbles

    x_flat, s_flat = run(0.0)
    x_step, s_step = run(0.27)
    assert s_flat == 0 and s_step > 0
    assert x_step < x_flat
    # blocked at the first riser face (x = 2.0) with the front feet ~0.2 m ahead of the base
    assert x_step < 2.0


def test_env_determinism():
    def roll():
        env = VecEnv(EnvConfig(n_envs=8), np.random.default_rng(3))
        act = np.random.default_rng(4)
        out = []
        for _ in range(30):
            o = env.observe()
            info = env.step(act.normal(size=(8, 12)))
            out.append((o["points"].copy(), o["heights"].copy(), info["reward"].copy()))
        return out, env.pos.copy()

    a, pa = roll()
    b, pb = roll()
    np.testing.assert_array_equal(pa, pb)
    for x, y in zip(a, b):
        for u, v in zip(x, y):
            np.testing.assert_array_equal(u, v)


def test_non_finite_action_faults_and_resets():
    env = quiet_env(n=3)
    env.episode_step[:] = 7
    act = np.zeros((3, 12))
    act[1, 4] = np.nan
    env.observe()
    info = env.step(act)
    assert info["fault"].tolist() == [False, True, False]
    assert info["done"][1]
    assert env.episode_step[1] == 0 and env.episode_step[0] == 8
    assert np.all(np.isfinite(env.q))


def test_observe_is_idempotent_between_steps():
    env = quiet_env()
    a = env.observe()
    b = env.observe()
    assert a is b
    env.step(np.zeros((4, 12)))
    assert env.observe() is not a


def test_stack_is_newest_first_and_cleared_on_reset():
    env = quiet_env(n=2)
    o1 = env.observe()["obs"].copy()
    env.step(np.full((2, 12), 0.1))
    o = env.observe()
    np.testing.assert_array_equal(o["stack"][:, 1], o1)
    np.testing.assert_array_equal(o["stack"][:, 0], o["obs"])
    assert np.all(o["stack"][:, 2:] == 0.0)


def test_policy_points_shape_and_alignment_on_flat_ground():
    env = quiet_env(n=2, n_points=48)
    o = env.observe()
    assert o["points"].shape == (2, 48, 3) and o["weights"].shape == (2, 48)
    # noiseless flat ground sits at -NOMINAL_HEIGHT in the body frame
    np.testing.assert_allclose(o["points"][..., 2], -NOMINAL_HEIGHT, atol=1e-9)
    assert o["heights"].shape == (2, 34, 22)
    np.testing.assert_allclose(o["heights"], 0.0, atol=1e-12)


def test_stair_eval_spawn_and_goal():
    cfg = EnvConfig(physics_randomization=False)
    env = VecEnv.stair_eval(cfg, [0.1, 0.2], 0.3, 5, np.random.default_rng(0))
    assert env.n == 10
    np.testing.assert_allclose(env.pos[:, 0], 1.0)
    np.testing.assert_allclose(env.commands, [[1.0, 0.0, 0.0]] * 10)
    assert env.goal_x == pytest.approx(1.0 + 1.0 + 7 * 0.3)
    assert env.fid.tolist() == [0] * 5 + [1] * 5


# ---- terrain ----------------------------------------------------------------------

@pytest.mark.parametrize("kind", KINDS)
def test_terrain_deterministic_per_seed(kind):
    a = generate_terrain(kind, 4, 7)
    b = generate_terrain(kind, 4, 7)
    np.testing.assert_array_equal(a.heights, b.heights)
    assert a.heights.shape == (160, 160)


def test_terrain_difficulty_schedules():
    assert rough_amplitude(0) == 0.0
    assert rough_amplitude(9) == pytest.approx(0.10)
    assert stair_rise(0) == pytest.approx(0.05) and stair_rise(9) == pytest.approx(0.27)
    flat = generate_terrain("rough", 0, 1)
    assert np.all(flat.heights == 0.0)
    amps = [np.abs(generate_terrain("rough", lv, 1).heights).max() for lv in range(N_LEVELS)]
    assert all(a <= b + 1e-12 for a, b in zip(amps, amps[1:]))


def test_stair_field_steps():
    f = generate_terrain("stairs", 5, 3)
    levels = np.unique(np.round(np.abs(f.heights) / stair_rise(5), 9))
    np.testing.assert_allclose(levels, np.round(levels))


def test_stair_course_profile():
    f = stair_course(0.15, 0.3)
    bank = TerrainBank([f])
    x = np.array([1.9, 2.1, 2.45, last_tread_x(0.3) + 0.1, 20.0])
    h = bank.height(np.zeros(5, dtype=int), x, np.full(5, 8.0))
    np.testing.assert_allclose(h, [0.0, 0.15, 0.30, 8 * 0.15, 8 * 0.15], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-np.pi, np.pi))
def test_heightmap_flat_is_zero_for_any_yaw(yaw):
    bank = TerrainBank([generate_terrain("rough", 0, 0)])
    h = sample_heightmap(bank, np.zeros(1, dtype=int), np.array([[3.0, 4.0]]), np.array([yaw]),
                         np.array([NOMINAL_HEIGHT]))
    assert h.shape == (1, 34, 22)
    np.testing.assert_allclose(h, 0.0, atol=1e-12)


def test_heightmap_mirror_symmetry_on_straight_stairs():
    bank = TerrainBank([stair_course(0.1, 0.3)])
    h = sample_heightmap(bank, np.zeros(1, dtype=int), np.array([[2.0, 8.0]]), np.zeros(1),
                         np.array([NOMINAL_HEIGHT]))[0]
    np.testing.assert_allclose(h, h[:, ::-1], atol=1e-12)


# ---- rewards ----------------------------------------------------------------------

def reward_inputs(rng, n=5):
    return RewardInputs(
        v_body=rng.normal(size=(n, 3)), ang_vel=rng.normal(size=(n, 3)), gravity=rng.normal(size=(n, 3)),
        qd=rng.normal(size=(n, 12)), qdd=rng.normal(size=(n, 12)) * 100, torque=rng.normal(size=(n, 12)) * 5,
        base_height=rng.uniform(0.2, 0.4, n), foot_height=rng.uniform(0, 0.1, (n, 4)),
        foot_speed_xy=rng.uniform(0, 1, (n, 4)), action=rng.normal(size=(n, 12)),
        prev_action=rng.normal(size=(n, 12)), prev_prev_action=rng.normal(size=(n, 12)))


def test_reward_rows_match_table_formulas():
    rng = np.random.default_rng(0)
    s = reward_inputs(rng)
    cmd = rng.normal(size=(5, 3))
    r = compute_rewards(s, cmd)
    for e in range(5):
        ref = {
            "lin_vel_tracking": math.exp(-4 * ((cmd[e, 0] - s.v_body[e, 0]) ** 2 + (cmd[e, 1] - s.v_body[e, 1]) ** 2)),
            "ang_vel_tracking": math.exp(-4 * (cmd[e, 2] - s.ang_vel[e, 2]) ** 2),
            "lin_vel_z": s.v_body[e, 2] ** 2,
            "ang_vel_xy": s.ang_vel[e, 0] ** 2 + s.ang_vel[e, 1] ** 2,
            "uprightness": s.gravity[e, 0] ** 2 + s.gravity[e, 1] ** 2,
            "joint_acc": sum(v * v for v in s.qdd[e]),
            "joint_power": sum(abs(a) * abs(b) for a, b in zip(s.torque[e], s.qd[e])),
            "body_height": (NOMINAL_HEIGHT - s.base_height[e]) ** 2,
            "foot_clearance": sum((FOOT_CLEARANCE_TARGET - h) ** 2 * v
                                  for h, v in zip(s.foot_height[e], s.foot_speed_xy[e])),
            "action_rate": sum((a - b) ** 2 for a, b in zip(s.action[e], s.prev_action[e])),
            "smoothness": sum((a - 2 * b + c) ** 2 for a, b, c in
                              zip(s.action[e], s.prev_action[e], s.prev_prev_action[e])),
            "joint_torque": sum(v * v for v in s.torque[e]),
            "joint_vel": sum(v * v for v in s.qd[e]),
        }
        p = [a * b for a, b in zip(s.torque[e], s.qd[e])]
        m = sum(p) / 12
        ref["power_distribution"] = (sum((x - m) ** 2 for x in p) / 12) ** 2
        for k, v in ref.items():
            assert abs(r[k][e] - v) <= 1e-12 * max(1.0, abs(v)), k


def test_reward_examples():
    s = reward_inputs(np.random.default_rng(1), n=1)
    s.v_body[:] = [[0.3, -0.2, 0.0]]
    s.action[:] = s.prev_action[:] = s.prev_prev_action[:] = 0.7
    r = compute_rewards(s, np.array([[0.3, -0.2, 0.0]]))
    assert r["lin_vel_tracking"][0] == 1.0
    assert r["action_rate"][0] == 0.0 and r["smoothness"][0] == 0.0
    r = compute_rewards(s, np.array([[0.8, -0.2, 0.0]]))
    assert abs(r["lin_vel_tracking"][0] - EXP_M1) < 1e-12


def test_table_weights():
    assert BASE_WEIGHTS["lin_vel_tracking"] == 1.0 and BASE_WEIGHTS["ang_vel_tracking"] == 0.5
    assert BASE_WEIGHTS["lin_vel_z"] == -2.0 and BASE_WEIGHTS["power_distribution"] == -1e-5


def test_reward_anneal():
    w0 = reward_anneal(BASE_WEIGHTS, 0)
    for k, v in ANNEALED_W0.items():
        assert w0[k] == v
    assert w0["action_rate"] == -1.5e-5
    w1 = reward_anneal(BASE_WEIGHTS, 1)
    for k, v in ANNEALED_W0.items():
        assert w1[k] == v * 0.998
    w500 = reward_anneal(BASE_WEIGHTS, 500)
    assert abs(w500["joint_torque"] / ANNEALED_W0["joint_torque"] - ANNEAL_500) < 1e-12
    assert w500["lin_vel_tracking"] == BASE_WEIGHTS["lin_vel_tracking"]
    with pytest.raises(ValueError):
        reward_anneal(BASE_WEIGHTS, -1)


# ---- curriculum -------------------------------------------------------------------

def reference_curriculum(levels, streak, vx, events, rng_levels):
    """Plain re-statement of the level and command rules, one episode at a time."""
    out = []
    for kind, env, val in events:
        if kind == "episode":
            if val > 0.5:
                streak[env] = 0
                levels[env] = next(rng_levels) if levels[env] >= 9 else levels[env] + 1
            else:
                streak[env] += 1
                if streak[env] > 10:
                    levels[env] = max(levels[env] - 1, 0)
                    streak[env] = 0
        else:
            if val >= 0.9:
                vx = [max(vx[0] - 0.25, -2.0), min(vx[1] + 0.25, 2.0)]
        out.append((list(levels), list(streak), list(vx)))
    return out


def test_curriculum_examples():
    rng = np.random.default_rng(0)
    cs = CurriculumState.create(3, np.array([3, 4, 9]))
    curriculum_update(cs, [0], [0.6], None, rng)
    assert cs.levels[0] == 4 and cs.fail_streak[0] == 0
    for _ in range(10):
        curriculum_update(cs, [1], [0.5], None, rng)
    assert cs.levels[1] == 4
    curriculum_update(cs, [1], [0.2], None, rng)
    assert cs.levels[1] == 3 and cs.fail_streak[1] == 0
    curriculum_update(cs, [], [], 0.95, rng)
    assert cs.vx_range == [-1.25, 1.25]
    curriculum_update(cs, [], [], 0.89, rng)
    assert cs.vx_range == [-1.25, 1.25]


def test_curriculum_scripted_trace_200_episodes():
    trace_rng = np.random.default_rng(11)
    events = []
    for _ in range(200):
        if trace_rng.random() < 0.15:
            events.append(("tracking", None, float(trace_rng.uniform(0.8, 1.0))))
        else:
            events.append(("episode", int(trace_rng.integers(0, 3)),
                           float(trace_rng.choice([0.2, 0.5, 0.51, 0.9]))))
    init = [9, 0, 5]
    cs = CurriculumState.create(3, np.array(init))
    rng = np.random.default_rng(5)
    got = []
    respawns = []
    for kind, env, val in events:
        if kind == "episode":
            before = int(cs.levels[env])
            curriculum_update(cs, [env], [val], None, rng)
            if before == 9 and val > 0.5:
                respawns.append(int(cs.levels[env]))
        else:
            curriculum_update(cs, [], [], val, rng)
        got.append((cs.levels.tolist(), cs.fail_streak.tolist(), list(cs.vx_range)))
    ref = reference_curriculum(list(init), [0, 0, 0], [-1.0, 1.0], events, iter(respawns))
    assert got == ref
    assert respawns, "trace must exercise the top-level respawn"
    assert all(0 <= r <= 9 for r in respawns)
    assert any(s == 0 for _, s, _ in [(0, g[1][0], 0) for g in got])


def test_top_level_respawn_is_uniform():
    rng = np.random.default_rng(0)
    cs = CurriculumState.create(2000, np.full(2000, 9))
    curriculum_update(cs, np.arange(2000), np.full(2000, 0.9), None, rng)
    counts = np.bincount(cs.levels, minlength=10)
    assert counts.min() > 130 and counts.max() < 270


def test_command_range_caps():
    cs = CurriculumState.create(1)
    for _ in range(20):
        curriculum_update(cs, [], [], 1.0, np.random.default_rng(0))
    assert cs.vx_range == [-2.0, 2.0]


# ---- randomization ----------------------------------------------------------------

def test_randomization_ranges_and_tiers():
    r = randomize_episode(np.random.default_rng(0), 100_000)
    for name, (lo, hi) in (("payload", R.PAYLOAD), ("kp_factor", R.KP_FACTOR), ("kd_factor", R.KD_FACTOR),
                           ("motor_strength", R.MOTOR_STRENGTH), ("friction", R.FRICTION),
                           ("delay_ms", R.DELAY_MS), ("prune_prob", R.PRUNE_PROB)):
        v = getattr(r, name)
        assert v.min() >= lo and v.max() <= hi, name
    assert np.all((r.com_shift >= -50) & (r.com_shift <= 50))
    assert abs(r.payload.mean() - 0.5) < 0.01
    assert np.all((r.bias >= R.BIAS_RANGES[:, 0]) & (r.bias <= R.BIAS_RANGES[:, 1]))
    assert np.all((r.noise_mean >= 0) & (r.noise_mean <= R.NOISE_MEAN_HIGH))
    assert np.all((r.noise_std >= 0) & (r.noise_std <= R.NOISE_STD_HIGH))
    freq = np.bincount(r.tier, minlength=3) / len(r.tier)
    np.testing.assert_allclose(freq, [0.30, 0.50, 0.20], atol=0.01)
    band = R.TIER_BANDS[r.tier]
    assert np.all((r.tier_amplitude >= band[:, 0]) & (r.tier_amplitude <= band[:, 1]))
    assert np.all(r.delay_substeps <= 3)


def test_randomization_toggles():
    r = randomize_episode(np.random.default_rng(0), 10, exteroception_noise=False, physics=False)
    assert np.all(r.bias == 0) and np.all(r.noise_std == 0) and np.all(r.prune_prob == 0)
    assert np.all(r.friction == 1.0) and np.all(r.delay_ms == 0) and np.all(r.kp_factor == 1.0)


# ---- observations -----------------------------------------------------------------

def proprio_state(rng, n):
    return ProprioState(rng.normal(size=(n, 3)), rng.normal(size=(n, 3)), rng.normal(size=(n, 12)),
                        rng.normal(size=(n, 12)), rng.normal(size=(n, 3)), rng.normal(size=(n, 4, 3)))


def test_observation_noise_bounds():
    rng = np.random.default_rng(0)
    n = 100_000
    s = ProprioState(np.zeros((n, 3)), np.zeros((n, 3)), np.tile(NOMINAL_Q, (n, 1)), np.zeros((n, 12)),
                     np.zeros((n, 3)), np.zeros((n, 4, 3)))
    cmd, prev = np.zeros((n, 3)), np.zeros((n, 12))
    clean = actor_observation(s, cmd, prev, None, noise=False)
    noisy = actor_observation(s, cmd, prev, rng, noise=True)
    d = noisy - clean
    assert clean.shape == (n, 45)
    assert np.abs(d[:, 0:3]).max() <= NOISE_ANG_VEL * 0.25
    assert np.abs(d[:, 3:6]).max() <= NOISE_GRAVITY
    assert np.abs(d[:, 9:21]).max() <= NOISE_JOINT_POS
    assert np.abs(d[:, 9:21]).max() > 0.99 * NOISE_JOINT_POS
    assert np.abs(d[:, 21:33]).max() <= NOISE_JOINT_VEL * 0.05
    assert np.all(d[:, 6:9] == 0) and np.all(d[:, 33:] == 0)


def test_noise_disabled_equals_clean_fields():
    s = proprio_state(np.random.default_rng(1), 4)
    a = actor_observation(s, np.ones((4, 3)), np.zeros((4, 12)), np.random.default_rng(2), noise=False)
    b = actor_observation(s, np.ones((4, 3)), np.zeros((4, 12)), None, noise=False)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a[:, 3:6], s.gravity)


def test_privileged_bundle_groups():
    s = proprio_state(np.random.default_rng(1), 4)
    rand = randomize_episode(np.random.default_rng(0), 4)
    g = privileged_state(s, rand)
    assert list(g) == list(PRIVILEGED_GROUPS) and len(g) == 6
    assert sum(v.shape[1] for v in g.values()) == PRIVILEGED_DIM
    env = quiet_env(n=2)
    o = env.observe()
    assert o["privileged"].shape == (2, PRIVILEGED_DIM) and o["heights"].shape == (2, 34, 22)
