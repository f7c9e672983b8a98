"""Cloud replay CSV: header ``x,y,z`` then frames, each opened by a
``timestamp,<seconds>,`` row."""
from __future__ import annotations

import csv
import os

import numpy as np


def read_replay(path: str | os.PathLike) -> list[tuple[float, np.ndarray]]:
    frames: list[tuple[float, list]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y", "z"]:
            raise ValueError(f"{path}: expected header x,y,z, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if row[0].strip() == "timestamp":
                frames.append((float(row[1]), []))
                continue
            if not frames:
                raise ValueError(f"{path}:{lineno}: point row before the first timestamp row")
            frames[-1][1].append([float(v) for v in row[:3]])
    return [(t, np.asarray(p, dtype=np.float64).reshape(-1, 3)) for t, p in frames]


def write_replay(path: str | os.PathLike, frames: list[tuple[float, np.ndarray]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z"])
        for t, pts in frames:
            w.writerow(["timestamp", repr(float(t)), ""])
            for p in np.asarray(pts).reshape(-1, 3):
                w.writerow([repr(float(v)) for v in p])
