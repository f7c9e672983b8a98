"""Clipped PPO with the encoder's auxiliary objectives in one loss."""
from __future__ import annotations

import copy

import numpy as np

from .. import objectives as O
from ..numerics import tensor as T
from ..numerics.optim import adam_step, clip_grad_norm
from ..numerics.tensor import NonFiniteError, Tape, backward
from .rollout import RolloutBatch

LOSS_COLUMNS = ("loss_total", "loss_ppo", "loss_value", "entropy", "loss_est", "loss_vae_p",
                "loss_vae_e", "recon_p", "recon_e", "kl_p", "kl_pe", "loss_contrastive",
                "versatility_gain", "versatility_objective", "approx_kl", "clip_frac")

KL_STD_FLOOR = 1e-6


def _floor(std):
    return T.clip(std, KL_STD_FLOOR, None)


def minibatch_loss(model, mb: dict, cfg, beta: float, rng: np.random.Generator):
    """Total loss tensor and a dict of float components for one minibatch."""
    enc = model.encoder
    eps = {"z_p": mb["eps_zp"], "z_e": mb["eps_ze"], "z_pe": mb["eps_zpe"]}
    ctx = enc.encode(mb["stack"], mb["points"], mb["weights"], eps=eps)

    mean = model.actor(mb["obs"], ctx.z_pe.sample, mb["v_input"])
    logp = model.actor.log_prob(mean, mb["actions"])
    ratio = T.exp(T.sub(logp, mb["log_probs"]))
    adv = mb["advantages"]
    surr = T.minimum(T.mul(ratio, adv), T.mul(T.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), adv))
    loss_ppo = T.neg(T.mean(surr))

    code = enc.anchor(mb["heights"])
    value = model.critic(mb["privileged"], mb["command"], code)
    v_old, ret = mb["values"], mb["returns"]
    v_clip = T.add(v_old, T.clip(T.sub(value, v_old), -cfg.clip, cfg.clip))
    loss_value = T.mean(T.maximum(T.square(T.sub(value, ret)), T.square(T.sub(v_clip, ret))))
    entropy = model.actor.entropy()

    loss_est = O.loss_estimation(ctx.v_hat, mb["v_true"])
    recon_p = O._mse(enc.decode_next_obs(ctx.z_p.sample), mb["next_obs"])
    recon_e = O._mse(enc.decode_height(ctx.z_pe.sample), mb["heights"])
    kl_p = O.gaussian_kl(ctx.z_p.mean, _floor(ctx.z_p.std))
    kl_pe = O.gaussian_kl(ctx.z_pe.mean, _floor(ctx.z_pe.std))
    vae_p = T.add(recon_p, T.mul(beta, kl_p))
    vae_e = T.add(recon_e, T.mul(beta, kl_pe))
    z_rand = rng.uniform(-1.0, 1.0, ctx.z_pe.sample.shape)
    contrastive = O.loss_contrastive(ctx.z_pe.sample, code, z_rand)
    gain = O.versatility_gain(ctx.z_pe.sample, ctx.z_pe.std)
    objective = T.sub(gain, T.mul(cfg.encoder_kl_scale, kl_pe))

    total = T.add(loss_ppo, T.mul(cfg.value_coef, loss_value))
    if cfg.entropy_coef:
        total = T.sub(total, T.mul(cfg.entropy_coef, entropy))
    for scale, term in ((cfg.estimation_scale, loss_est), (cfg.vae_proprio_scale, vae_p),
                        (cfg.vae_extero_scale, vae_e), (cfg.contrastive_scale, contrastive)):
        if scale:
            total = T.add(total, T.mul(scale, term))
    if cfg.versatility_scale:
        total = T.sub(total, T.mul(cfg.versatility_scale, objective))

    log_ratio = logp.data - mb["log_probs"]
    parts = {
        "loss_total": total.item(), "loss_ppo": loss_ppo.item(), "loss_value": loss_value.item(),
        "entropy": entropy.item(), "loss_est": loss_est.item(), "loss_vae_p": vae_p.item(),
        "loss_vae_e": vae_e.item(), "recon_p": recon_p.item(), "recon_e": recon_e.item(),
        "kl_p": kl_p.item(), "kl_pe": kl_pe.item(), "loss_contrastive": contrastive.item(),
        "versatility_gain": gain.item(), "versatility_objective": objective.item(),
        "approx_kl": float(np.mean(np.expm1(log_ratio) - log_ratio)),
        "clip_frac": float(np.mean(np.abs(np.exp(log_ratio) - 1.0) > cfg.clip)),
    }
    return total, parts


def _minibatch(batch: RolloutBatch, idx: np.ndarray) -> dict:
    names = ("obs", "stack", "points", "weights", "privileged", "command", "heights", "v_true",
             "next_obs", "v_input", "eps_zp", "eps_ze", "eps_zpe", "actions", "log_probs", "values",
             "advantages", "returns")
    return {k: batch.flat(k)[idx] for k in names}


def ppo_update(model, batch: RolloutBatch, cfg, opt_states: dict, beta: float,
               rng: np.random.Generator) -> dict:
    """Epochs of minibatch steps.  Returns the mean of every loss component,
    ``recon_epoch`` (last-epoch mean reconstruction loss) and ``fault``.

    A non-finite value anywhere restores the parameters and optimizer states
    held at entry and aborts the iteration.
    """
    if batch.advantages is None:
        raise ValueError("ppo_update: advantages have not been computed")
    snap = model.snapshot()
    opt_snap = copy.deepcopy(opt_states)
    groups = model.group_parameters()
    n = batch.steps * batch.n_envs
    sums = {k: 0.0 for k in LOSS_COLUMNS}
    count = 0
    recon_epoch = 0.0
    try:
        for epoch in range(cfg.epochs):
            perm = rng.permutation(n)
            recon_epoch, n_mb = 0.0, 0
            for idx in np.array_split(perm, cfg.minibatches):
                mb = _minibatch(batch, idx)
                with Tape() as tape:
                    total, parts = minibatch_loss(model, mb, cfg, beta, rng)
                params = [p for g in groups.values() for p in g.values()]
                grads = backward(tape, total, params)
                i = 0
                for name, g in groups.items():
                    gg = grads[i:i + len(g)]
                    i += len(g)
                    gg, _ = clip_grad_norm(gg, cfg.max_grad_norm)
                    adam_step(list(g.values()), gg, opt_states[name])
                for k in LOSS_COLUMNS:
                    sums[k] += parts[k]
                count += 1
                recon_epoch += parts["recon_p"] + parts["recon_e"]
                n_mb += 1
            recon_epoch /= n_mb
        if not all(np.isfinite(v.data).all() for v in model.named_parameters().values()):
            raise NonFiniteError("parameters became non-finite")
    except NonFiniteError as exc:
        model.restore(snap)
        opt_states.clear()
        opt_states.update(opt_snap)
        report = {k: 0.0 for k in LOSS_COLUMNS}
        report.update(fault=1, recon_epoch=None, fault_message=str(exc))
        return report
    report = {k: v / count for k, v in sums.items()}
    report.update(fault=0, recon_epoch=recon_epoch)
    return report
