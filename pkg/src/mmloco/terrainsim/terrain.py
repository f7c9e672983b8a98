"""Procedural heightfield tiles and bilinear lookups.

A tile is ``TILE_SIZE`` metres square sampled every ``RESOLUTION`` metres;
grid index ``(i, j)`` sits at world ``(i * res, j * res)``.  Training tiles
are built to be periodic so that a robot leaving one copy walks onto the next.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from ..perception.geometry import PRIVILEGED_GRID, VoxelGridSpec
from .robot import NOMINAL_HEIGHT

KINDS = ("rough", "stairs", "gaps", "discrete")
N_LEVELS = 10
RESOLUTION = 0.05
TILE_CELLS = 160
TILE_SIZE = TILE_CELLS * RESOLUTION
STAIR_RUN = 0.30
PLATFORM_HALF = 1.0
GAP_DEPTH = 1.0


def rough_amplitude(level: int) -> float:
    return 0.10 * level / (N_LEVELS - 1)


def stair_rise(level: int) -> float:
    return 0.05 + level * (0.27 - 0.05) / (N_LEVELS - 1)


def gap_width(level: int) -> float:
    return 0.05 + level * (0.50 - 0.05) / (N_LEVELS - 1)


def obstacle_height(level: int) -> float:
    return 0.03 + level * (0.27 - 0.03) / (N_LEVELS - 1)


@dataclass
class TerrainField:
    kind: str
    level: int
    seed: int
    heights: np.ndarray          # (n, n)
    periodic: bool = True

    @property
    def size(self) -> float:
        return self.heights.shape[0] * RESOLUTION

    @property
    def center(self) -> np.ndarray:
        return np.full(2, 0.5 * self.size)


def _chebyshev_from_center(n: int) -> np.ndarray:
    c = (np.arange(n) + 0.5) * RESOLUTION - 0.5 * n * RESOLUTION
    return np.maximum(np.abs(c)[:, None], np.abs(c)[None, :])


def _periodic_noise(rng, n: int, coarse: int) -> np.ndarray:
    g = rng.uniform(-1.0, 1.0, size=(coarse, coarse))
    t = np.arange(n) * coarse / n
    i0 = np.floor(t).astype(int)
    f = t - i0
    i1 = (i0 + 1) % coarse
    a = g[i0][:, i0] * (1 - f)[None, :] + g[i0][:, i1] * f[None, :]
    b = g[i1][:, i0] * (1 - f)[None, :] + g[i1][:, i1] * f[None, :]
    return a * (1 - f)[:, None] + b * f[:, None]


def generate_terrain(kind: str, level: int, seed: int, cells: int = TILE_CELLS) -> TerrainField:
    if kind not in KINDS:
        raise ValueError(f"unknown terrain kind {kind!r}; expected one of {KINDS}")
    if not (isinstance(level, (int, np.integer)) and 0 <= level < N_LEVELS):
        raise ValueError(f"terrain level must be an integer in [0, {N_LEVELS - 1}], got {level!r}")
    rng = np.random.default_rng([seed, KINDS.index(kind), int(level)])
    n = cells
    d = _chebyshev_from_center(n)
    if kind == "rough":
        # 0.2 m noise lattice, bilinearly upsampled
        h = rough_amplitude(level) * _periodic_noise(rng, n, max(1, int(round(n * RESOLUTION / 0.2))))
    elif kind == "stairs":
        rise = stair_rise(level)
        steps = np.floor(np.maximum(d - PLATFORM_HALF, 0.0) / STAIR_RUN + 1e-9)
        steps = np.where(d > PLATFORM_HALF, steps + 1, 0)
        # ascend outward or descend outward, by seed; cap leaves a flat rim that tiles cleanly
        top = np.floor((0.5 * n * RESOLUTION - PLATFORM_HALF - 0.3) / STAIR_RUN)
        steps = np.minimum(steps, top)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        h = sign * rise * steps
    elif kind == "gaps":
        w = gap_width(level)
        period = w + 1.0
        r = d - PLATFORM_HALF
        in_gap = (r > 0) & (np.mod(r, period) < w) & (d < 0.5 * n * RESOLUTION - 0.3)
        h = np.where(in_gap, -GAP_DEPTH, 0.0)
    else:
        hmax = obstacle_height(level)
        h = np.zeros((n, n))
        for _ in range(40):
            sx, sy = rng.integers(6, 20, size=2)
            x0, y0 = rng.integers(0, n, size=2)
            xs = np.arange(x0, x0 + sx) % n
            ys = np.arange(y0, y0 + sy) % n
            h[np.ix_(xs, ys)] = rng.uniform(-hmax, hmax)
        h[d < PLATFORM_HALF] = 0.0
    return TerrainField(kind, int(level), int(seed), np.asarray(h, dtype=np.float64))


def stair_course(rise: float, run: float, n_steps: int = 8, approach: float = 1.0,
                 start_x: float = 1.0, cells: int = 2 * TILE_CELLS) -> TerrainField:
    """Straight ascending flight along +x: flat approach, then ``n_steps`` treads."""
    x = np.arange(cells) * RESOLUTION
    k = np.clip(np.floor((x - start_x - approach) / run + 1e-9) + 1, 0, n_steps)
    h = np.broadcast_to((rise * k)[:, None], (cells, cells)).copy()
    return TerrainField("stairs", -1, 0, h, periodic=False)


def last_tread_x(run: float, n_steps: int = 8, approach: float = 1.0, start_x: float = 1.0) -> float:
    return start_x + approach + (n_steps - 1) * run


def _bilinear(heights: np.ndarray, fid, x, y, periodic) -> np.ndarray:
    """Lookup in a bank ``(F, n, n)``; ``fid``, ``x``, ``y``, ``periodic`` broadcast."""
    n = heights.shape[-1]
    u = np.asarray(x, dtype=np.float64) / RESOLUTION
    v = np.asarray(y, dtype=np.float64) / RESOLUTION
    per = np.asarray(periodic, dtype=bool)
    if per.all():
        u, v = np.mod(u, n), np.mod(v, n)
    elif not per.any():
        u, v = np.clip(u, 0.0, n - 1), np.clip(v, 0.0, n - 1)
    else:
        u = np.where(per, np.mod(u, n), np.clip(u, 0.0, n - 1))
        v = np.where(per, np.mod(v, n), np.clip(v, 0.0, n - 1))
    i0 = np.floor(u).astype(np.int64)
    j0 = np.floor(v).astype(np.int64)
    fu, fv = u - i0, v - j0
    # periodic rows wrap, clamped rows saturate (their u never exceeds n - 1)
    i0 %= n
    j0 %= n
    if per.all():
        i1, j1 = (i0 + 1) % n, (j0 + 1) % n
    else:
        i1 = np.where(per, (i0 + 1) % n, np.minimum(i0 + 1, n - 1))
        j1 = np.where(per, (j0 + 1) % n, np.minimum(j0 + 1, n - 1))
    flat = heights.reshape(-1)
    base = np.asarray(fid, dtype=np.int64) * (n * n)
    r0, r1 = base + i0 * n, base + i1 * n
    h00, h01 = flat[r0 + j0], flat[r0 + j1]
    h10, h11 = flat[r1 + j0], flat[r1 + j1]
    top = h00 + (h01 - h00) * fv
    bot = h10 + (h11 - h10) * fv
    return top + (bot - top) * fu


def height_at(field: TerrainField, x, y) -> np.ndarray:
    """Bilinear height; queries outside the tile read the clamped edge value."""
    return _bilinear(field.heights[None], 0, x, y, False)


class TerrainBank:
    """A stack of equally sized tiles addressed by index."""

    def __init__(self, fields: list[TerrainField]):
        shapes = {f.heights.shape for f in fields}
        if len(shapes) != 1:
            raise ValueError(f"TerrainBank: tiles differ in shape {shapes}")
        self.fields = fields
        self.heights = np.stack([f.heights for f in fields])
        self.periodic = np.array([f.periodic for f in fields])
        self.size = fields[0].size

    def __len__(self) -> int:
        return len(self.fields)

    def height(self, fid, x, y) -> np.ndarray:
        fid = np.asarray(fid)
        return _bilinear(self.heights, fid, x, y, self.periodic[fid])

    @classmethod
    def curriculum(cls, kinds=KINDS, variants: int = 2, seed: int = 0) -> tuple["TerrainBank", np.ndarray]:
        """All ``kind x level x variant`` tiles; returns the bank and an index table
        ``[kind, level, variant] -> tile``."""
        fields, table = [], np.zeros((len(kinds), N_LEVELS, variants), dtype=np.int64)
        for a, kind in enumerate(kinds):
            for lvl in range(N_LEVELS):
                for v in range(variants):
                    table[a, lvl, v] = len(fields)
                    fields.append(generate_terrain(kind, lvl, seed * 1000 + v))
        return cls(fields), table


def heightmap_offsets(spec: VoxelGridSpec = PRIVILEGED_GRID) -> np.ndarray:
    return spec.cell_centers()


def sample_heightmap(bank: TerrainBank, fid, base_xy, yaw, base_z,
                     spec: VoxelGridSpec = PRIVILEGED_GRID) -> np.ndarray:
    """Yaw-aligned scan ``(E, rows, cols)`` relative to the nominal ground under the base."""
    off = spec.cell_centers()                                   # (r, c, 2)
    c, s = np.cos(yaw)[:, None, None], np.sin(yaw)[:, None, None]
    wx = base_xy[:, 0, None, None] + c * off[..., 0] - s * off[..., 1]
    wy = base_xy[:, 1, None, None] + s * off[..., 0] + c * off[..., 1]
    h = bank.height(np.asarray(fid)[:, None, None], wx, wy)
    return h - (np.asarray(base_z) - NOMINAL_HEIGHT)[:, None, None]


def sample_privileged_heightmap(field: TerrainField, pose) -> np.ndarray:
    """Single-robot scan; ``pose = (x, y, z, roll, pitch, yaw)``."""
    x, y, z, _, _, yaw = pose
    bank = TerrainBank([field])
    return sample_heightmap(bank, np.zeros(1, dtype=np.int64), np.array([[x, y]]),
                            np.array([yaw]), np.array([z]))[0]


def export_heightfield_csv(field: TerrainField, path: str | os.PathLike) -> None:
    """Rows ``x,y,z`` for every grid node."""
    n = field.heights.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z"])
        for i in range(n):
            for j in range(n):
                w.writerow([f"{i * RESOLUTION:.4f}", f"{j * RESOLUTION:.4f}", repr(float(field.heights[i, j]))])
