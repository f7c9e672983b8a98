"""Gaussian latents with hard-bounded standard deviations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import nn
from ..numerics import tensor as T
from ..numerics.tensor import Tensor

STD_MIN = 0.0
STD_MAX = 5.0


@dataclass
class GaussianLatent:
    mean: Tensor
    std: Tensor
    sample: Tensor


def bounded_std(raw_std) -> Tensor:
    """softplus, then clamp to ``[STD_MIN, STD_MAX]``."""
    return T.clip(T.softplus(raw_std), STD_MIN, STD_MAX)


def constrained_sample(mean, raw_std, rng: np.random.Generator | None = None,
                       eps: np.ndarray | None = None) -> GaussianLatent:
    """``mean + std * eps`` with ``eps ~ N(0, I)``; pass ``eps`` to replay a draw."""
    mean = T.as_tensor(mean)
    std = bounded_std(raw_std)
    if eps is None:
        eps = (rng or np.random.default_rng()).standard_normal(mean.shape)
    return GaussianLatent(mean, std, T.add(mean, T.mul(std, Tensor(eps))))


class GaussianHead(nn.Module):
    """Linear map to a mean and a raw std of size ``dim`` each."""

    def __init__(self, n_in: int, dim: int, rng: np.random.Generator):
        self.dim = dim
        self.mean = nn.Linear(n_in, dim, rng)
        self.raw_std = nn.Linear(n_in, dim, rng, gain=0.1)

    def __call__(self, x: Tensor, eps: np.ndarray | None = None,
                 rng: np.random.Generator | None = None) -> GaussianLatent:
        return constrained_sample(self.mean(x), self.raw_std(x), rng=rng, eps=eps)
