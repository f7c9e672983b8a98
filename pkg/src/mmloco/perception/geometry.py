"""Rigid transforms, voxel filtering and fixed-footprint grid selection.

Points are ``(..., P, 3)`` arrays in the robot body frame (x forward, y left,
z up).  Transforms carry optional leading batch axes so that one call can
serve every environment in a vectorized rollout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class SE3:
    rotation: np.ndarray      # (..., 3, 3)
    translation: np.ndarray   # (..., 3)

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if R.shape[-2:] != (3, 3) or t.shape[-1:] != (3,) or R.shape[:-2] != t.shape[:-1]:
            raise ValueError(f"SE3: bad shapes rotation {R.shape}, translation {t.shape}")
        gram = np.swapaxes(R, -1, -2) @ R
        if np.max(np.abs(gram - np.eye(3)), initial=0.0) > ORTHO_TOL:
            raise ValueError("SE3: rotation is not orthonormal")
        if np.max(np.abs(np.linalg.det(R) - 1.0), initial=0.0) > ORTHO_TOL:
            raise ValueError("SE3: rotation has det != +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, batch: tuple[int, ...] = ()) -> "SE3":
        return cls(np.broadcast_to(np.eye(3), batch + (3, 3)).copy(), np.zeros(batch + (3,)))

    @classmethod
    def from_rpy(cls, roll, pitch, yaw, translation) -> "SE3":
        return cls(rpy_to_matrix(roll, pitch, yaw), np.asarray(translation, dtype=np.float64))

    @property
    def matrix(self) -> np.ndarray:
        out = np.zeros(self.rotation.shape[:-2] + (4, 4))
        out[..., :3, :3] = self.rotation
        out[..., :3, 3] = self.translation
        out[..., 3, 3] = 1.0
        return out


def rpy_to_matrix(roll, pitch, yaw) -> np.ndarray:
    """Z-Y-X Euler angles, ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    roll, pitch, yaw = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (roll, pitch, yaw)))
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    R = np.empty(roll.shape + (3, 3))
    R[..., 0, 0] = cy * cp
    R[..., 0, 1] = cy * sp * sr - sy * cr
    R[..., 0, 2] = cy * sp * cr + sy * sr
    R[..., 1, 0] = sy * cp
    R[..., 1, 1] = sy * sp * sr + cy * cr
    R[..., 1, 2] = sy * sp * cr - cy * sr
    R[..., 2, 0] = -sp
    R[..., 2, 1] = cp * sr
    R[..., 2, 2] = cp * cr
    return R


def se3_apply(T: SE3, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    return np.einsum("...ij,...pj->...pi", T.rotation, pts) + T.translation[..., None, :]


def se3_inverse(T: SE3) -> SE3:
    Rt = np.swapaxes(T.rotation, -1, -2)
    return SE3(Rt, -np.einsum("...ij,...j->...i", Rt, T.translation))


def se3_compose(A: SE3, B: SE3) -> SE3:
    """``A @ B``: apply ``B`` first, then ``A``."""
    return SE3(A.rotation @ B.rotation,
               np.einsum("...ij,...j->...i", A.rotation, B.translation) + A.translation)


@dataclass(frozen=True)
class VoxelGridSpec:
    """Rectangular footprint ahead of the body.

    Row 0 is the far edge: it spans ``x in [forward_offset, forward_offset + leaf)``
    and rows step back toward the robot, so the footprint covers
    ``[forward_offset + leaf - depth, forward_offset + leaf)``.  Columns run
    from ``y = -width/2`` (col 0) to ``+width/2``.
    """
    leaf: float
    forward_offset: float
    width: float
    depth: float

    def __post_init__(self):
        if self.leaf <= 0 or self.width <= 0 or self.depth <= 0:
            raise ValueError(f"VoxelGridSpec: non-positive size in {self}")

    @property
    def rows(self) -> int:
        return int(round(self.depth / self.leaf))

    @property
    def cols(self) -> int:
        return int(round(self.width / self.leaf))

    @property
    def x_far(self) -> float:
        return self.forward_offset + self.leaf

    def cell_index(self, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xy = np.asarray(xy, dtype=np.float64)
        r = np.floor((self.x_far - xy[..., 0]) / self.leaf).astype(np.int64)
        c = np.floor((xy[..., 1] + 0.5 * self.width) / self.leaf).astype(np.int64)
        return r, c

    def cell_centers(self) -> np.ndarray:
        """(rows, cols, 2) body-frame xy of every cell center."""
        r = np.arange(self.rows)
        c = np.arange(self.cols)
        x = self.x_far - (r + 0.5) * self.leaf
        y = -0.5 * self.width + (c + 0.5) * self.leaf
        return np.stack(np.meshgrid(x, y, indexing="ij"), axis=-1)


POLICY_GRID = VoxelGridSpec(leaf=0.05, forward_offset=0.9, width=1.1, depth=0.5)
PRIVILEGED_GRID = VoxelGridSpec(leaf=0.05, forward_offset=0.9, width=1.1, depth=1.7)

_BIAS = 1 << 20
_BITS = 21


def _voxel_keys(points: np.ndarray, leaf: float) -> np.ndarray:
    idx = np.floor(points / leaf).astype(np.int64) + _BIAS
    if np.any(idx < 0) or np.any(idx >= 1 << _BITS):
        raise ValueError("voxel_downsample: points too far from origin for the key packing")
    return (idx[..., 0] << (2 * _BITS)) | (idx[..., 1] << _BITS) | idx[..., 2]


def voxel_downsample(points: np.ndarray, leaf: float) -> np.ndarray:
    """Centroid of each occupied voxel, ordered by voxel key."""
    if leaf <= 0:
        raise ValueError(f"voxel_downsample: leaf must be positive, got {leaf}")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        return np.zeros((0, 3))
    _, inv, counts = np.unique(_voxel_keys(pts, leaf), return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    out = np.zeros((len(counts), 3))
    np.add.at(out, inv, pts)
    return out / counts[:, None]


def voxel_downsample_batch(points: np.ndarray, valid: np.ndarray, leaf: float, n_out: int,
                           fill: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row voxel filtering of a padded batch, resized to ``n_out`` points.

    Returns ``(E, n_out, 3)`` points and ``(E, n_out)`` weights.  Rows with more
    than ``n_out`` voxels keep an evenly strided subset in key order; rows with
    fewer repeat voxels cyclically and each copy gets weight ``1/multiplicity``
    so weighted statistics are unaffected by the padding.  Rows without any
    valid point receive the single ``fill`` point.
    """
    E, P, _ = points.shape
    env = np.broadcast_to(np.arange(E)[:, None], (E, P))[valid]
    pts = points[valid]
    out = np.broadcast_to(np.asarray(fill, dtype=np.float64), (E, n_out, 3)).copy()
    w = np.ones((E, n_out))
    if len(pts) == 0:
        return out, w
    # 15 bits per axis is +-819 m at 5 cm; the env id takes the top bits
    idx = np.floor(pts / leaf).astype(np.int64) + (1 << 14)
    if np.any(idx < 0) or np.any(idx >= 1 << 15):
        raise ValueError("voxel_downsample_batch: points outside the packable range")
    key = (env.astype(np.int64) << 45) | (idx[:, 0] << 30) | (idx[:, 1] << 15) | idx[:, 2]
    uniq, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    cent = np.stack([np.bincount(inv, pts[:, a], len(uniq)) for a in range(3)], axis=1)
    cent /= counts[:, None]
    uenv = (uniq >> 45).astype(np.int64)
    n_vox = np.bincount(uenv, minlength=E)
    start = np.concatenate([[0], np.cumsum(n_vox)[:-1]])
    has = n_vox > 0
    j = np.arange(n_out)
    nv = np.maximum(n_vox, 1)[:, None]
    # strided pick when oversubscribed, cyclic repeat when short
    pick = np.where(nv >= n_out, (j[None, :] * nv) // n_out, j[None, :] % nv)
    sel = start[:, None] + pick
    out[has] = cent[sel[has]]
    mult = np.where(nv >= n_out, 1, (n_out // nv) + (j[None, :] % nv < n_out % nv))
    w[has] = 1.0 / mult[has]
    return out, w


def grid_select(points: np.ndarray, spec: VoxelGridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Max-z height per cell and the occupancy mask; empty cells read 0."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    heights = np.full((spec.rows, spec.cols), -np.inf)
    r, c = spec.cell_index(pts[:, :2])
    inside = (r >= 0) & (r < spec.rows) & (c >= 0) & (c < spec.cols)
    np.maximum.at(heights, (r[inside], c[inside]), pts[inside, 2])
    occupied = np.isfinite(heights)
    heights[~occupied] = 0.0
    return heights, occupied
