"""Central-difference oracle for analytic gradients."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor, backward


def finite_difference_check(f: Callable[..., Tensor], x: Tensor | Sequence[Tensor],
                            eps: float = 1e-5, coords: int | None = None,
                            rng: np.random.Generator | None = None) -> float:
    """Max over checked coordinates of ``|analytic - numeric| / max(1, |analytic|)``.

    ``f(*x)`` must return a scalar tensor.  Every coordinate of every input is
    checked unless ``coords`` is given, in which case that many coordinates
    per input are drawn with ``rng``.
    """
    xs = [x] if isinstance(x, Tensor) else list(x)
    for t in xs:
        t.requires_grad = True
    with Tape() as tape:
        loss = f(*xs)
    analytic = backward(tape, loss, xs)

    worst = 0.0
    for t, g in zip(xs, analytic):
        flat = t.data.reshape(-1)
        gflat = g.reshape(-1)
        if coords is None or coords >= flat.size:
            idx = range(flat.size)
        else:
            idx = (rng or np.random.default_rng(0)).choice(flat.size, size=coords, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            up = float(f(*xs).data)
            flat[i] = orig - eps
            down = float(f(*xs).data)
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            err = abs(gflat[i] - numeric) / max(1.0, abs(gflat[i]))
            worst = max(worst, err)
    return worst
