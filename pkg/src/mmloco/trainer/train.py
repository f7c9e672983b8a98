"""Training loop, metrics stream and checkpoints."""
from __future__ import annotations

import csv
import logging
import os
import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..numerics.checkpoint import load_parameters, save_parameters
from ..numerics.optim import AdamState
from ..objectives import BetaSchedulerState, ReturnsWindow, adaptive_beta_update, bootstrap_probability
from ..terrainsim.curriculum import curriculum_update
from ..terrainsim.env import VecEnv
from ..terrainsim.rewards import ANNEAL_RATE
from .config import TrainConfig, dump_config, parse_config
from .policy import ActorCritic
from .ppo import LOSS_COLUMNS, ppo_update
from .rollout import collect_rollouts, gae_advantages

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("iteration", "mean_step_reward", "mean_episode_return", "episodes",
                  "mean_episode_tracking", "mean_step_tracking", "mean_level", "vx_low", "vx_high",
                  "p_boot", "beta", "anneal_factor", *LOSS_COLUMNS, "stumbles", "falls", "faults",
                  "update_fault")


@dataclass
class TrainState:
    cfg: TrainConfig
    seed: int
    iteration: int
    model: ActorCritic
    opt: dict
    beta: BetaSchedulerState
    env: VecEnv
    rng: np.random.Generator
    returns: ReturnsWindow


def init_state(cfg: TrainConfig, seed: int) -> TrainState:
    model_ss, env_ss, run_ss = np.random.SeedSequence(seed).spawn(3)
    ppo = cfg.ppo
    model = ActorCritic(cfg.encoder, ppo.actor_hidden, ppo.critic_hidden,
                        np.random.default_rng(model_ss), ppo.init_std)
    opt = {g: AdamState.for_params(list(p.values()), lr=ppo.learning_rate)
           for g, p in model.group_parameters().items()}
    env = VecEnv(cfg.env, np.random.default_rng(env_ss))
    return TrainState(cfg, seed, 0, model, opt, BetaSchedulerState(beta=ppo.beta_init), env,
                      np.random.default_rng(run_ss), ReturnsWindow(ppo.returns_window))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def train_iteration(state: TrainState) -> dict:
    cfg = state.cfg.ppo
    env = state.env
    p_boot = bootstrap_probability(state.returns) if len(state.returns) else 0.0
    batch = collect_rollouts(state.model, env, state.rng, cfg.steps, p_boot, cfg.gamma, cfg.reward_scale)
    gae_advantages(batch, cfg.gamma, cfg.lam)
    report = ppo_update(state.model, batch, cfg, state.opt, state.beta.beta, state.rng)
    if report["fault"]:
        log.warning("iteration %d: update aborted (%s); parameters restored",
                    state.iteration, report.get("fault_message"))
    beta_used = state.beta.beta
    if report["recon_epoch"] is not None:
        adaptive_beta_update(state.beta, report["recon_epoch"])

    st = batch.stats
    state.returns.extend(st["returns"])
    ep_tracking = float(np.mean(st["tracking"])) if st["tracking"] else 0.0
    # command range widens on the iteration's finished episodes
    if st["tracking"] and state.cfg.env.curriculum:
        curriculum_update(env.curriculum, [], [], ep_tracking, env.rng)
    env.curriculum.iteration += 1
    state.iteration += 1
    row = {
        "iteration": state.iteration,
        "mean_step_reward": float(batch.rewards.mean()),
        "mean_episode_return": float(np.mean(st["returns"])) if st["returns"] else 0.0,
        "episodes": len(st["returns"]),
        "mean_episode_tracking": ep_tracking,
        "mean_step_tracking": st["step_tracking"],
        "mean_level": float(env.curriculum.levels.mean()),
        "vx_low": env.curriculum.vx_range[0], "vx_high": env.curriculum.vx_range[1],
        "p_boot": p_boot, "beta": beta_used, "anneal_factor": ANNEAL_RATE ** (state.iteration - 1),
        **{k: report[k] for k in LOSS_COLUMNS},
        "stumbles": st["stumbles"], "falls": st["falls"], "faults": st["faults"],
        "update_fault": report["fault"],
    }
    if st["faults"]:
        log.warning("iteration %d: %d environment faults reset", state.iteration, st["faults"])
    return row


# --------------------------------------------------------------- checkpoints
def save_checkpoint(state: TrainState, path: str | os.PathLike) -> Path:
    """``<path>`` holds the parameters (WAQ1); ``<path>.state`` everything else
    needed for a bit-exact resume."""
    path = Path(path)
    save_parameters(path, {k: v.data for k, v in state.model.named_parameters().items()})
    extra = {"config": dump_config(state.cfg), "seed": state.seed, "iteration": state.iteration,
             "opt": state.opt, "beta": state.beta, "env": state.env, "rng": state.rng,
             "returns": state.returns}
    with open(str(path) + ".state", "wb") as fh:
        pickle.dump(extra, fh, protocol=pickle.HIGHEST_PROTOCOL)
    return path


def load_model(path: str | os.PathLike, cfg: TrainConfig | None = None) -> tuple[ActorCritic, TrainConfig]:
    """Parameters plus the config stored next to them (or ``cfg`` when given)."""
    if cfg is None:
        side = str(path) + ".state"
        if not os.path.exists(side):
            raise FileNotFoundError(f"{side} missing; pass the run config explicitly")
        with open(side, "rb") as fh:
            cfg = parse_config(pickle.load(fh)["config"])
    model = ActorCritic(cfg.encoder, cfg.ppo.actor_hidden, cfg.ppo.critic_hidden,
                        np.random.default_rng(0), cfg.ppo.init_std)
    model.restore(load_parameters(path))
    return model, cfg


def load_checkpoint(path: str | os.PathLike) -> TrainState:
    with open(str(path) + ".state", "rb") as fh:
        extra = pickle.load(fh)
    model, cfg = load_model(path, parse_config(extra["config"]))
    return TrainState(cfg, extra["seed"], extra["iteration"], model, extra["opt"], extra["beta"],
                      extra["env"], extra["rng"], extra["returns"])


# ---------------------------------------------------------------- main loop
def train(cfg: TrainConfig, seed: int, out_dir: str | os.PathLike, resume: str | None = None,
          iterations: int | None = None, progress=None) -> TrainState:
    """Run (or continue) training; metrics go to ``out_dir/metrics.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = load_checkpoint(resume) if resume else init_state(cfg, seed)
    total = state.cfg.run.iterations if iterations is None else iterations
    every = state.cfg.run.checkpoint_every
    metrics = out / "metrics.csv"
    new_file = not metrics.exists()
    with open(out / "config.ini", "w") as fh:
        fh.write(dump_config(state.cfg))
    with open(metrics, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(METRIC_COLUMNS)
        while state.iteration < total:
            row = train_iteration(state)
            writer.writerow([_fmt(row[c]) for c in METRIC_COLUMNS])
            fh.flush()
            if progress is not None:
                progress(row)
            if state.iteration % every == 0 or state.iteration == total:
                save_checkpoint(state, out / f"ckpt_{state.iteration:05d}.waq")
    return state


def read_metrics(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
