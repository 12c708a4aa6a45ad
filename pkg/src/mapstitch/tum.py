"""TUM trajectory format: `timestamp tx ty tz qx qy qz qw` per line.

Quaternions are Hamilton convention in (qx, qy, qz, qw) order, unit norm
enforced on write.  Floats are printed with 9 significant digits.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

from .geometry import Pose


def rotation_to_quat(matrix: np.ndarray) -> np.ndarray:
    """(qx, qy, qz, qw) unit quaternion for a rotation matrix."""
    q = Rotation.from_matrix(np.asarray(matrix, dtype=float)).as_quat()
    return q / np.linalg.norm(q)


def quat_to_rotation(quat) -> np.ndarray:
    return Rotation.from_quat(np.asarray(quat, dtype=float)).as_matrix()


def format_row(timestamp: float, translation, quat) -> str:
    values = [timestamp, *np.asarray(translation, dtype=float), *np.asarray(quat, dtype=float)]
    return " ".join(f"{v:.9g}" for v in values)


def write_tum(rows) -> str:
    """Serialize (timestamp, Pose) rows to TUM text."""
    lines = []
    for timestamp, pose in rows:
        lines.append(format_row(timestamp, pose.translation, rotation_to_quat(pose.rotation)))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_tum(text: str) -> list:
    """Parse TUM text back into (timestamp, Pose) rows."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 8:
            raise ValueError(f"line {lineno}: expected 8 fields, got {len(parts)}")
        values = [float(p) for p in parts]
        pose = Pose(quat_to_rotation(values[4:8]), np.array(values[1:4]))
        rows.append((values[0], pose))
    return rows
