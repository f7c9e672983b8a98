"""Command line entry point: ``python -m mmloco <command>``."""
from __future__ import annotations

import argparse
import configparser
import logging
import sys

import numpy as np


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_train(args) -> int:
    from .trainer.config import load_config
    from .trainer.train import train

    cfg = None if args.resume else load_config(args.config)

    def progress(row):
        logging.info("iter %d  step_reward %.4f  tracking %.3f  level %.2f", row["iteration"],
                     row["mean_step_reward"], row["mean_step_tracking"], row["mean_level"])
    train(cfg, args.seed, args.out, resume=args.resume, iterations=args.iterations, progress=progress)
    return 0


def cmd_eval_stairs(args) -> int:
    from .trainer.evaluate import evaluate_stairs
    from .trainer.train import load_model

    model, cfg = load_model(args.ckpt)
    rates = evaluate_stairs(model, cfg, args.rises, args.run, args.robots, args.limit, args.seed)
    lines = ["rise,success_rate"] + [f"{r},{s}" for r, s in zip(args.rises, rates)]
    print("\n".join(lines))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def cmd_export(args) -> int:
    from .trainer.evaluate import export_embeddings
    from .trainer.train import load_model

    model, cfg = load_model(args.ckpt)
    out = args.out or f"embeddings_{args.scenario}.csv"
    export_embeddings(model, cfg, args.scenario, args.steps, out, seed=args.seed)
    print(out)
    return 0


def load_profile(path):
    """``[perturbation]`` section: noise_mean, noise_std (3 values each), bias
    (6 values), prune_prob, tier_amplitude, z_ref."""
    from .perception.perturb import PerturbationConfig

    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    if not cp.read(path):
        raise ValueError(f"cannot read profile {path}")
    if "perturbation" not in cp:
        raise ValueError(f"{path}: missing [perturbation] section")
    sec = cp["perturbation"]
    known = {"noise_mean": 3, "noise_std": 3, "bias": 6, "prune_prob": 1, "tier_amplitude": 1, "z_ref": 1}
    vals = {}
    for key, raw in sec.items():
        if key not in known:
            raise ValueError(f"{path}: unknown key {key!r}; valid: {', '.join(known)}")
        v = _floats(raw)
        if len(v) != known[key]:
            raise ValueError(f"{path}: {key} needs {known[key]} value(s), got {len(v)}")
        vals[key] = np.array(v) if known[key] > 1 else v[0]
    z_ref = vals.pop("z_ref", -0.3)
    return PerturbationConfig(**vals), z_ref


def cmd_perturb(args) -> int:
    from .perception.perturb import perturb_cloud
    from .perception.replay import read_replay, write_replay

    cfg, z_ref = load_profile(args.profile)
    frames = read_replay(args.inp)
    out = [(t, perturb_cloud(pts, cfg, z_ref, seed=args.seed, step=i)) for i, (t, pts) in enumerate(frames)]
    path = args.out or str(args.inp).removesuffix(".csv") + "_perturbed.csv"
    write_replay(path, out)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmloco", description="multi-modal locomotion training toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a policy from a config file")
    t.add_argument("--config", help="key = value config file")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True, help="output directory for metrics and checkpoints")
    t.add_argument("--resume", help="checkpoint to continue from (its config is reused)")
    t.add_argument("--iterations", type=int, help="override run.iterations")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval-stairs", help="stair-flight success rates per rise")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--rises", type=_floats, default=_floats("0.10,0.15,0.20,0.25,0.30,0.35"))
    e.add_argument("--run", type=float, default=0.3)
    e.add_argument("--robots", type=int, default=1000)
    e.add_argument("--limit", type=float, default=10.0, help="time limit in seconds")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", help="optional CSV path")
    e.set_defaults(func=cmd_eval_stairs)

    x = sub.add_parser("export-embeddings", help="roll the policy and write latent vectors")
    x.add_argument("--ckpt", required=True)
    x.add_argument("--scenario", required=True, choices=["flat", "rough", "stairs-easy", "stairs-hard"])
    x.add_argument("--steps", type=int, default=100)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--out")
    x.set_defaults(func=cmd_export)

    r = sub.add_parser("perturb-replay", help="apply a perturbation profile to a cloud replay file")
    r.add_argument("--in", dest="inp", required=True)
    r.add_argument("--profile", required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out")
    r.set_defaults(func=cmd_perturb)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "train" and not args.resume and not args.config:
        print("train: --config is required unless --resume is given", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
