#!/usr/bin/env python3
"""A few PPO iterations at toy scale, then the evaluation commands on the result.

Takes well under a minute; the policy is far from trained.
"""
import tempfile
from pathlib import Path

from mmloco.cli import main

CONFIG = """
[ppo]
n_envs = 16
steps = 12
epochs = 2
minibatches = 2
actor_hidden = 32, 32
critic_hidden = 32, 32
[env]
n_points = 8
[encoder]
mixer_channels = 8
token_hidden = 4
point_widths = 16, 16
fuse_hidden = 16
decoder_hidden = 16
anchor_hidden = 16
zp_dim = 8
ze_dim = 8
[run]
iterations = 6
checkpoint_every = 3
"""

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp)
    (out / "toy.ini").write_text(CONFIG)
    main(["train", "--config", str(out / "toy.ini"), "--seed", "0", "--out", str(out / "run")])
    ckpt = str(out / "run" / "ckpt_00006.waq")
    main(["eval-stairs", "--ckpt", ckpt, "--rises", "0.05,0.15", "--robots", "20", "--limit", "4"])
    main(["export-embeddings", "--ckpt", ckpt, "--scenario", "flat", "--steps", "5",
          "--out", str(out / "flat.csv")])
    print((out / "flat.csv").read_text().splitlines()[0][:80], "...")
