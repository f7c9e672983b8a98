"""Short ring of past captures re-expressed in the current body frame."""
from __future__ import annotations

from collections import deque

import numpy as np

from .geometry import SE3, se3_apply, se3_compose, se3_inverse

MEMORY_DEPTH = 3


class ExteroMemory:
    """Oldest-to-newest ring of ``(cloud, pose_at_capture)``; poses are odometry-frame."""

    def __init__(self, depth: int = MEMORY_DEPTH):
        if depth < 1:
            raise ValueError("ExteroMemory depth must be >= 1")
        self.depth = depth
        self.entries: deque[tuple[np.ndarray, SE3]] = deque(maxlen=depth)

    def push(self, cloud: np.ndarray, pose: SE3) -> None:
        self.entries.append((np.asarray(cloud, dtype=np.float64).reshape(-1, 3), pose))

    def __len__(self) -> int:
        return len(self.entries)

    def clear(self) -> None:
        self.entries.clear()


def memory_assemble(mem: ExteroMemory, current_pose: SE3) -> np.ndarray:
    """Newest capture first, then older ones, all mapped through ``T_now^-1 T_capture``."""
    if not mem.entries:
        return np.zeros((0, 3))
    inv_now = se3_inverse(current_pose)
    parts = [se3_apply(se3_compose(inv_now, pose), cloud) for cloud, pose in reversed(mem.entries)]
    return np.concatenate(parts, axis=0)


class BatchedExteroMemory:
    """Fixed-size memory for ``E`` environments with ``P`` points per capture."""

    def __init__(self, n_envs: int, n_points: int, depth: int = MEMORY_DEPTH):
        self.depth = depth
        self.points = np.zeros((n_envs, depth, n_points, 3))
        self.valid = np.zeros((n_envs, depth, n_points), dtype=bool)
        self.rot = np.broadcast_to(np.eye(3), (n_envs, depth, 3, 3)).copy()
        self.trans = np.zeros((n_envs, depth, 3))

    def reset(self, env_ids: np.ndarray) -> None:
        self.valid[env_ids] = False

    def push(self, env_ids: np.ndarray, points: np.ndarray, valid: np.ndarray,
             rot: np.ndarray, trans: np.ndarray) -> None:
        """Slot 0 is the newest capture; older ones shift back."""
        for arr, new in ((self.points, points), (self.valid, valid), (self.rot, rot), (self.trans, trans)):
            arr[env_ids, 1:] = arr[env_ids, :-1]
            arr[env_ids, 0] = new

    def assemble(self, rot_now: np.ndarray, trans_now: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(E, depth*P, 3) points in the current frame and the validity mask."""
        Rn_t = np.swapaxes(rot_now, -1, -2)[:, None]                         # (E,1,3,3)
        R_rel = Rn_t @ self.rot                                              # (E,K,3,3)
        t_rel = (Rn_t @ (self.trans - trans_now[:, None])[..., None])[..., 0]
        pts = self.points @ np.swapaxes(R_rel, -1, -2) + t_rel[:, :, None]
        E, K, P, _ = pts.shape
        return pts.reshape(E, K * P, 3), self.valid.reshape(E, K * P)
