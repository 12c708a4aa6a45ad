"""Rigid/similarity transforms, triangulation and two-view error models.

All angles are stored and reported in degrees.  Points are numpy arrays of
shape (3,) in meters; point sets are arrays of shape (N, 3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateConfiguration,
    DegenerateRay,
    ParallelRays,
    ZeroIntersectionAngle,
)

_ORTHO_TOL = 1e-9


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) point array, got shape {pts.shape}")
    return pts


@dataclass(eq=False)
class Pose:
    """Camera pose: camera-to-world rotation and camera center.

    World point of a camera-frame point p is ``rotation @ p + translation``;
    the camera center in world coordinates is ``translation``.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        if err > 1e-7 or np.linalg.det(self.rotation) < 0:
            raise ValueError("rotation must be orthonormal with det +1")

    @property
    def center(self) -> np.ndarray:
        return self.translation

    def to_world(self, p_cam) -> np.ndarray:
        return self.rotation @ np.asarray(p_cam, dtype=float) + self.translation

    def to_camera(self, p_world) -> np.ndarray:
        return self.rotation.T @ (np.asarray(p_world, dtype=float) - self.translation)

    def inverse(self) -> "Pose":
        return Pose(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """Pose mapping other's camera frame through self (self ∘ other)."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return (
            np.allclose(self.rotation, other.rotation, atol=atol)
            and np.allclose(self.translation, other.translation, atol=atol)
        )


@dataclass(eq=False)
class SimilarityTransform:
    """p' = scale * rotation @ p + translation, scale > 0."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.scale = float(self.scale)
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        out = self.scale * _as_points(pts) @ self.rotation.T + self.translation
        return out[0] if single else out

    def apply_pose(self, pose: Pose) -> Pose:
        """Transport a pose so its center maps exactly like apply(center)."""
        return Pose(self.rotation @ pose.rotation, self.apply(pose.translation))

    def inverse(self) -> "SimilarityTransform":
        inv_s = 1.0 / self.scale
        inv_r = self.rotation.T
        return SimilarityTransform(inv_s, inv_r, -inv_s * inv_r @ self.translation)

    def compose(self, other: "SimilarityTransform") -> "SimilarityTransform":
        """self ∘ other: apply other first, then self."""
        return SimilarityTransform(
            self.scale * other.scale,
            self.rotation @ other.rotation,
            self.scale * self.rotation @ other.translation + self.translation,
        )

    def allclose(self, other: "SimilarityTransform", atol: float = 1e-9) -> bool:
        return (
            abs(self.scale - other.scale) <= atol
            and np.allclose(self.rotation, other.rotation, atol=atol)
            and np.allclose(self.translation, other.translation, atol=atol)
        )


@dataclass
class IntersectionGeometry:
    """Two-view intersection geometry and the resulting depth error.

    Populated from a baseline/height pair, it keeps tan(theta) = B/H = b/f
    and depth_error = plane_error / tan(theta) consistent by construction.
    """

    theta_deg: float
    baseline_m: float
    height_m: float
    image_baseline_px: float
    focal_px: float
    plane_error_m: float
    depth_error_m: float

    @classmethod
    def from_two_view(
        cls, baseline_m: float, height_m: float, focal_px: float, plane_error_m: float
    ) -> "IntersectionGeometry":
        if baseline_m <= 0 or height_m <= 0 or focal_px <= 0:
            raise ValueError("baseline, height and focal length must be positive")
        tan_theta = baseline_m / height_m
        theta = math.degrees(math.atan(tan_theta))
        return cls(
            theta_deg=theta,
            baseline_m=baseline_m,
            height_m=height_m,
            image_baseline_px=focal_px * tan_theta,
            focal_px=focal_px,
            plane_error_m=plane_error_m,
            depth_error_m=depth_error(plane_error_m, theta),
        )


def depth_error(plane_error_m: float, theta_deg: float) -> float:
    """Depth-direction error for a given plane error and intersection angle."""
    if plane_error_m < 0:
        raise ValueError("plane error must be non-negative")
    if theta_deg <= 0 or theta_deg >= 180:
        raise ZeroIntersectionAngle(f"intersection angle {theta_deg} deg out of (0, 180)")
    tan_theta = math.tan(math.radians(theta_deg))
    if abs(tan_theta) < 1e-15:
        raise ZeroIntersectionAngle(f"tan({theta_deg} deg) vanishes")
    return plane_error_m / tan_theta


def intersection_angle(center_a, center_b, point) -> float:
    """Angle in degrees at `point` between the rays to the two camera centers."""
    center_a = np.asarray(center_a, dtype=float)
    center_b = np.asarray(center_b, dtype=float)
    point = np.asarray(point, dtype=float)
    ray_a = point - center_a
    ray_b = point - center_b
    norm_a = np.linalg.norm(ray_a)
    norm_b = np.linalg.norm(ray_b)
    if norm_a < 1e-12 or norm_b < 1e-12 or np.linalg.norm(center_a - center_b) < 1e-12:
        raise DegenerateRay("point coincides with a camera center or centers coincide")
    cosang = np.dot(ray_a, ray_b) / (norm_a * norm_b)
    return math.degrees(math.acos(np.clip(cosang, -1.0, 1.0)))


def intersection_angles(center_a, center_b, points) -> np.ndarray:
    """Vectorized intersection_angle over an (N, 3) point array."""
    pts = _as_points(points)
    ray_a = pts - np.asarray(center_a, dtype=float)
    ray_b = pts - np.asarray(center_b, dtype=float)
    na = np.linalg.norm(ray_a, axis=1)
    nb = np.linalg.norm(ray_b, axis=1)
    if np.any(na < 1e-12) or np.any(nb < 1e-12):
        raise DegenerateRay("a point coincides with a camera center")
    cosang = np.clip(np.sum(ray_a * ray_b, axis=1) / (na * nb), -1.0, 1.0)
    return np.degrees(np.arccos(cosang))


def triangulate(pose_a: Pose, pose_b: Pose, ray_a, ray_b, min_angle_deg: float = 0.1) -> np.ndarray:
    """Midpoint of the common perpendicular of two world rays.

    Rays are unit bearing vectors in each camera frame.
    """
    d_a = pose_a.rotation @ np.asarray(ray_a, dtype=float)
    d_b = pose_b.rotation @ np.asarray(ray_b, dtype=float)
    d_a = d_a / np.linalg.norm(d_a)
    d_b = d_b / np.linalg.norm(d_b)
    cosang = np.clip(abs(np.dot(d_a, d_b)), 0.0, 1.0)
    if math.degrees(math.acos(cosang)) <= min_angle_deg:
        raise ParallelRays(f"ray angle below {min_angle_deg} deg floor")
    c_a, c_b = pose_a.center, pose_b.center
    # Solve [d_a, -d_b] [s, t]^T = c_b - c_a in the least-squares sense.
    a11 = np.dot(d_a, d_a)
    a12 = -np.dot(d_a, d_b)
    a22 = np.dot(d_b, d_b)
    rhs = c_b - c_a
    b1 = np.dot(d_a, rhs)
    b2 = -np.dot(d_b, rhs)
    det = a11 * a22 - a12 * a12
    s = (a22 * b1 - a12 * b2) / det
    t = (a11 * b2 - a12 * b1) / det
    return 0.5 * ((c_a + s * d_a) + (c_b + t * d_b))


def estimate_similarity(src, dst) -> tuple[SimilarityTransform, float]:
    """Closed-form least-squares similarity fit dst ≈ s·R·src + t.

    Returns the transform and the residual RMS.  Raises
    DegenerateConfiguration for fewer than 3 points or collinear sources.
    """
    src = _as_points(src)
    dst = _as_points(dst)
    if src.shape != dst.shape:
        raise ValueError("source and destination point sets must match in length")
    n = src.shape[0]
    if n < 3:
        raise DegenerateConfiguration(f"need at least 3 correspondences, got {n}")

    mu_src = src.mean(axis=0)
    mu_dst = dst.mean(axis=0)
    d_src = src - mu_src
    d_dst = dst - mu_dst

    cov = d_dst.T @ d_src / n
    u, sing, vt = np.linalg.svd(cov)

    src_sing = np.linalg.svd(d_src, compute_uv=False)
    # Rank check: collinear sources leave the rotation about the line free.
    if src_sing[1] < 1e-9 * max(src_sing[0], 1e-300):
        raise DegenerateConfiguration("source points are collinear")

    sign = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sign[2, 2] = -1.0
    rot = u @ sign @ vt

    var_src = (d_src ** 2).sum() / n
    scale = float(np.trace(np.diag(sing) @ sign) / var_src)
    if not scale > 0:
        raise DegenerateConfiguration("non-positive scale from degenerate geometry")
    trans = mu_dst - scale * rot @ mu_src

    transform = SimilarityTransform(scale, rot, trans)
    residuals = dst - transform.apply(src)
    rms = float(np.sqrt((residuals ** 2).sum(axis=1).mean()))
    return transform, rms


def estimate_similarity_robust(
    src,
    dst,
    inlier_threshold: float,
    max_iterations: int = 100,
    rng: np.random.Generator | None = None,
) -> tuple[SimilarityTransform, float, np.ndarray]:
    """Random-sample-consensus wrapper around estimate_similarity.

    Returns (transform, residual RMS over inliers, inlier mask).  Meant for
    simulated outlier correspondences; the plain estimator is the default
    everywhere else.
    """
    src = _as_points(src)
    dst = _as_points(dst)
    n = src.shape[0]
    if n < 3:
        raise DegenerateConfiguration(f"need at least 3 correspondences, got {n}")
    rng = rng or np.random.default_rng(0)

    best_mask = None
    for _ in range(max_iterations):
        idx = rng.choice(n, size=3, replace=False)
        try:
            candidate, _ = estimate_similarity(src[idx], dst[idx])
        except DegenerateConfiguration:
            continue
        err = np.linalg.norm(dst - candidate.apply(src), axis=1)
        mask = err <= inlier_threshold
        if best_mask is None or mask.sum() > best_mask.sum():
            best_mask = mask
    if best_mask is None or best_mask.sum() < 3:
        raise DegenerateConfiguration("no consensus set of size >= 3 found")
    transform, rms = estimate_similarity(src[best_mask], dst[best_mask])
    return transform, rms, best_mask


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix from a normalized random quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
