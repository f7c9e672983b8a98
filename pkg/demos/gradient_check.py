#!/usr/bin/env python3
"""Check analytic gradients of the context encoder's height reconstruction loss
against central differences, one parameter tensor at a time."""
import numpy as np

from mmloco import numerics as nx
from mmloco.encoders import ContextEncoder, EncoderConfig
from mmloco.numerics import finite_difference_check

cfg = EncoderConfig(mixer_channels=8, mixer_blocks=1, token_hidden=4, point_widths=(8, 8), fuse_hidden=8,
                    decoder_hidden=8, anchor_hidden=8, zp_dim=4, ze_dim=4)
rng = np.random.default_rng(0)
enc = ContextEncoder(cfg, rng)
stack = rng.normal(size=(2, 6, 45))
points = rng.normal(size=(2, 12, 3))
heights = 0.1 * rng.normal(size=(2, 34, 22))
eps = {"z_p": rng.normal(size=(2, 4)), "z_e": rng.normal(size=(2, 4)), "z_pe": rng.normal(size=(2, 8))}


def loss(*_):
    ctx = enc.encode(stack, points, eps=eps)
    return nx.mean(nx.square(nx.sub(enc.decode_height(ctx.z_pe.sample), heights)))


for name, p in enc.named_parameters().items():
    if name.startswith(("height_anchor", "next_obs_decoder")):
        continue                                   # not on this loss's path
    err = finite_difference_check(loss, [p], coords=3, rng=rng)
    print(f"{name:40s} {err:.2e}")
