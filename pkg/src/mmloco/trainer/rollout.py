"""Rollout collection and advantage estimation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import tensor as T
from ..numerics.tensor import no_grad


@dataclass
class RolloutBatch:
    """Arrays of shape ``(T, E, ...)``; advantages/returns are filled by :func:`gae_advantages`."""
    obs: np.ndarray
    stack: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    privileged: np.ndarray
    command: np.ndarray
    heights: np.ndarray
    v_true: np.ndarray
    next_obs: np.ndarray
    v_input: np.ndarray
    boot: np.ndarray
    eps_zp: np.ndarray
    eps_ze: np.ndarray
    eps_zpe: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    last_values: np.ndarray
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None
    stats: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_envs(self) -> int:
        return self.rewards.shape[1]

    def flat(self, name: str) -> np.ndarray:
        a = getattr(self, name)
        return a.reshape((-1,) + a.shape[2:])


def policy_step(model, o: dict, rng: np.random.Generator, p_boot: float, deterministic: bool = False,
                with_value: bool = True) -> dict:
    """One inference pass: encode, choose the velocity input, act, evaluate."""
    E = o["obs"].shape[0]
    cfg = model.encoder.cfg
    eps = {"z_p": rng.standard_normal((E, cfg.zp_dim)), "z_e": rng.standard_normal((E, cfg.ze_dim)),
           "z_pe": rng.standard_normal((E, cfg.zpe_dim))}
    boot = rng.random(E) < p_boot
    with no_grad():
        ctx = model.encoder.encode(o["stack"], o["points"], o["weights"], eps=eps)
        v_hat = ctx.v_hat.data
        v_input = np.where(boot[:, None], v_hat, o["v_true"])
        z_pe = ctx.z_pe.mean if deterministic else ctx.z_pe.sample
        mean = model.actor(o["obs"], z_pe, v_input)
        if deterministic:
            actions = mean.data.copy()
        else:
            std = np.exp(model.actor.log_std.data)
            actions = mean.data + std * rng.standard_normal(mean.shape)
        out = {"eps": eps, "boot": boot, "v_hat": v_hat, "v_input": v_input, "actions": actions, "ctx": ctx}
        if with_value:
            out["log_probs"] = model.actor.log_prob(mean, actions).data
            code = model.encoder.anchor(o["heights"])
            out["values"] = model.critic(o["privileged"], o["command"], code).data
    return out


def collect_rollouts(model, env, rng: np.random.Generator, steps: int, p_boot: float,
                     gamma: float, reward_scale: float) -> RolloutBatch:
    bufs: dict[str, list] = {k: [] for k in (
        "obs", "stack", "points", "weights", "privileged", "command", "heights", "v_true", "next_obs",
        "v_input", "boot", "eps_zp", "eps_ze", "eps_zpe", "actions", "log_probs", "values", "rewards",
        "dones")}
    stats = {"returns": [], "tracking": [], "fraction": [], "levels": [], "faults": 0, "stumbles": 0,
             "falls": 0, "step_tracking": 0.0}
    for _ in range(steps):
        o = env.observe()
        p = policy_step(model, o, rng, p_boot)
        info = env.step(p["actions"], v_odometry=p["v_hat"])
        # time-outs are not terminal: fold the value of the pre-step state into the reward
        reward = info["reward"] * reward_scale + gamma * p["values"] * info["timeout"]
        for k in ("obs", "stack", "points", "weights", "privileged", "command", "heights", "v_true"):
            bufs[k].append(o[k])
        bufs["next_obs"].append(info["next_obs_clean"])
        for k in ("v_input", "boot", "actions", "log_probs", "values"):
            bufs[k].append(p[k])
        bufs["eps_zp"].append(p["eps"]["z_p"])
        bufs["eps_ze"].append(p["eps"]["z_e"])
        bufs["eps_zpe"].append(p["eps"]["z_pe"])
        bufs["rewards"].append(reward)
        bufs["dones"].append(info["done"].astype(np.float64))
        stats["faults"] += int(info["fault"].sum())
        stats["stumbles"] += int(info["stumble"].sum())
        stats["falls"] += int(info["fell"].sum())
        stats["step_tracking"] += float(info["terms"]["lin_vel_tracking"].mean()) / steps
        if info["episodes"] is not None:
            for k in ("returns", "tracking", "fraction", "levels"):
                stats[k].extend(np.asarray(info["episodes"][k]).tolist())
    o = env.observe()
    with no_grad():
        last = model.critic(o["privileged"], o["command"], model.encoder.anchor(o["heights"])).data
    batch = RolloutBatch(**{k: np.stack(v) for k, v in bufs.items()}, last_values=last)
    batch.stats = stats
    return batch


def gae(rewards, values, dones, last_values, gamma: float, lam: float):
    """Generalized advantage estimation over ``(T, E)`` arrays; returns raw
    advantages and the value targets."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    adv = np.zeros_like(rewards)
    acc = np.zeros(rewards.shape[1:])
    next_v = np.asarray(last_values, dtype=np.float64)
    for t in range(rewards.shape[0] - 1, -1, -1):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_v * live - values[t]
        acc = delta + gamma * lam * live * acc
        adv[t] = acc
        next_v = values[t]
    return adv, adv + values


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def gae_advantages(batch: RolloutBatch, gamma: float, lam: float) -> RolloutBatch:
    adv, ret = gae(batch.rewards, batch.values, batch.dones, batch.last_values, gamma, lam)
    batch.returns = ret
    batch.advantages = normalize_advantages(adv)
    return batch
