#!/usr/bin/env python3
"""Train and evaluate the desk-scale runs read by the training and stair acceptance tests.

Six trainings of configs/desk.ini (rough terrain only): versatility on and
off, seeds 0, 1, 2.  Each versatility-on run is then scored for velocity
tracking with and without exteroception noise.  Three more trainings of
configs/desk_stairs.ini add stair tiles to the curriculum.  Every
versatility-on run is put through the stair flight at 1000 robots.

Finished runs are skipped, so the script can be restarted after an interruption.

    python demos/desk_acceptance_runs.py [--out runs/desk] [--only on-seed0]
"""
from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from mmloco.trainer import load_config, train
from mmloco.trainer.evaluate import evaluate_stairs, evaluate_tracking
from mmloco.trainer.train import load_model

ROOT = Path(__file__).resolve().parents[1]
RISES = "0.10,0.15,0.20,0.25,0.30,0.35"


def run_one(name: str, config: str, versatility: bool, seed: int, out: Path, summary: dict) -> None:
    cfg = load_config(ROOT / "configs" / config)
    if not versatility:
        cfg.ppo.versatility_scale = 0.0
    d = out / name
    t0 = time.perf_counter()

    def progress(row):
        if row["iteration"] % 10 == 0:
            print(f"{name} iter {row['iteration']} tracking {row['mean_step_tracking']:.3f} "
                  f"level {row['mean_level']:.2f} {time.perf_counter() - t0:.0f}s", flush=True)
    train(cfg, seed, d, progress=progress)
    info = {"wall_seconds": time.perf_counter() - t0, "iterations": cfg.run.iterations,
            "versatility_scale": cfg.ppo.versatility_scale}
    # keep the final parameters only; config.ini stands in for the resume sidecar
    final = d / f"ckpt_{cfg.run.iterations:05d}.waq"
    for old in d.glob("ckpt_*.waq*"):
        if old != final:
            old.unlink()
    if versatility:
        model, mcfg = load_model(final, load_config(d / "config.ini"))
        if config == "desk.ini":
            info["tracking"] = evaluate_tracking(model, mcfg, seed=100 + seed)
            info["tracking_clean"] = evaluate_tracking(model, mcfg, seed=100 + seed, extero_noise=False)
        t1 = time.perf_counter()
        rates = evaluate_stairs(model, mcfg, [float(r) for r in RISES.split(",")], run=0.3, n_robots=1000,
                                time_limit=10.0, seed=0)
        with open(d / "stairs.csv", "w") as fh:
            fh.write("rise,success_rate\n" + "".join(f"{r},{v}\n" for r, v in zip(RISES.split(","), rates)))
        info["stairs_seconds"] = time.perf_counter() - t1
    summary[name] = info
    print(name, json.dumps(info), flush=True)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=ROOT / "runs" / "desk")
    ap.add_argument("--only", nargs="*", help="run names such as on-seed0 off-seed2 stairs-seed1")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "summary.json"
    summary = json.loads(path.read_text()) if path.exists() else {}
    plan = [(f"{'on' if v else 'off'}-seed{seed}", "desk.ini", v, seed) for seed in (0, 1, 2) for v in (True, False)]
    plan += [(f"stairs-seed{seed}", "desk_stairs.ini", True, seed) for seed in (0, 1, 2)]
    for name, config, versatility, seed in plan:
        if name in summary or (args.only and name not in args.only):
            continue
        run_one(name, config, versatility, seed, args.out, summary)
        path.write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
