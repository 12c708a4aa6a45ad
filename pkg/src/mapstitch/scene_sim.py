"""Deterministic synthetic world generator.

Produces trajectories, landmarks with simulated vocabulary words, per-frame
visibility and tracking-failure injection via observation dropout.  A world
is a pure function of its scenario config (including the rng seed).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field, fields

import numpy as np

from .config import NoiseConfig, SessionConfig
from .errors import EmptyFrame, InvalidConfig
from .geometry import Pose

SCHEMA_VERSION = 1

TRAJECTORY_KINDS = ("uav_s_curve", "street_loop", "indoor_room")

# Seed-stream salts so every random draw has its own deterministic stream.
_SALT_LANDMARKS = 11
_SALT_WORDS = 12
_SALT_DROPOUT = 13


@dataclass
class GeometryConfig:
    """Trajectory-shape knobs; defaults give a desk-scale scene per kind."""

    strip_count: int = 4
    strip_length_m: float = 160.0
    strip_spacing_m: float = 30.0
    altitude_m: float = 50.0
    speed_m_per_frame: float = 2.0
    wiggle_amp_m: float = 1.0
    wiggle_period_m: float = 40.0
    loop_width_m: float = 60.0
    loop_height_m: float = 40.0
    camera_height_m: float = 1.6
    heading_smooth_frames: int = 4
    landmark_band_m: float = 12.0
    landmark_max_height_m: float = 6.0
    room_half_m: float = 6.0
    orbit_radius_m: float = 3.0
    orbit_total_deg: float = 400.0
    terrain_relief_m: float = 2.0

    @classmethod
    def from_dict(cls, raw: dict) -> "GeometryConfig":
        known = {f.name for f in fields(cls)}
        for key in raw:
            if key not in known:
                raise InvalidConfig(f"geometry.{key}", "unknown field")
        return cls(**raw)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class ScenarioConfig:
    name: str = "unnamed"
    trajectory_kind: str = "uav_s_curve"
    frame_count: int = 200
    landmark_count: int = 1000
    vocabulary_size: int = 400
    camera_fov_deg: float = 90.0
    max_view_range_m: float = 120.0
    failure_windows: list = field(default_factory=list)
    observation_dropout_in_failure: float = 1.0
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    rng_seed: int = 0
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    session: SessionConfig = field(default_factory=SessionConfig)

    def validate(self) -> None:
        if self.trajectory_kind not in TRAJECTORY_KINDS:
            raise InvalidConfig("trajectory_kind", f"must be one of {TRAJECTORY_KINDS}")
        if self.frame_count < 0:
            raise InvalidConfig("frame_count", "must be >= 0")
        if self.landmark_count < 0:
            raise InvalidConfig("landmark_count", "must be >= 0")
        if self.vocabulary_size < 1:
            raise InvalidConfig("vocabulary_size", "must be >= 1")
        if not 0 < self.camera_fov_deg < 180:
            raise InvalidConfig("camera_fov_deg", "must lie in (0, 180)")
        if self.max_view_range_m <= 0:
            raise InvalidConfig("max_view_range_m", "must be positive")
        if not 0 <= self.observation_dropout_in_failure <= 1:
            raise InvalidConfig("observation_dropout_in_failure", "must lie in [0, 1]")
        last_end = -1
        for window in self.failure_windows:
            if len(window) != 2:
                raise InvalidConfig("failure_windows", "each window is [start, end)")
            start, end = window
            if not 0 <= start < end <= self.frame_count:
                raise InvalidConfig("failure_windows", f"window {window} out of range")
            if start < last_end:
                raise InvalidConfig("failure_windows", "windows must be disjoint and sorted")
            last_end = end

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        raw = dict(raw)
        version = raw.pop("schema_version", None)
        if version != SCHEMA_VERSION:
            raise InvalidConfig("schema_version", f"expected {SCHEMA_VERSION}, got {version}")
        known = {f.name for f in fields(cls)}
        for key in raw:
            if key not in known:
                raise InvalidConfig(key, "unknown field")
        noise = NoiseConfig.from_dict(raw.pop("noise", {}))
        geometry = GeometryConfig.from_dict(raw.pop("geometry", {}))
        session = SessionConfig.from_dict(raw.pop("session", {}))
        windows = [list(w) for w in raw.pop("failure_windows", [])]
        cfg = cls(noise=noise, geometry=geometry, session=session, failure_windows=windows, **raw)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "trajectory_kind": self.trajectory_kind,
            "frame_count": self.frame_count,
            "landmark_count": self.landmark_count,
            "vocabulary_size": self.vocabulary_size,
            "camera_fov_deg": self.camera_fov_deg,
            "max_view_range_m": self.max_view_range_m,
            "failure_windows": [list(w) for w in self.failure_windows],
            "observation_dropout_in_failure": self.observation_dropout_in_failure,
            "noise": self.noise.to_dict(),
            "rng_seed": self.rng_seed,
            "geometry": self.geometry.to_dict(),
            "session": self.session.to_dict(),
        }

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig("json", f"invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise InvalidConfig("json", "scenario file must hold a JSON object")
        return cls.from_dict(raw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


@dataclass
class Landmark:
    id: int
    position: np.ndarray
    word_id: int


@dataclass(eq=False)
class Frame:
    """One camera sample: ground truth pose plus simulated observations."""

    id: int
    timestamp: float
    gt_pose: Pose
    observations: list  # [(landmark_id, unit bearing ray in camera frame)]
    words: Counter

    def __post_init__(self):
        self._observed_ids = frozenset(lm_id for lm_id, _ in self.observations)

    @property
    def observed_ids(self) -> frozenset:
        return self._observed_ids


@dataclass
class World:
    config: ScenarioConfig
    landmarks: list
    gt_trajectory: list
    frames: list

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "landmarks": [
                {"id": lm.id, "position": lm.position.tolist(), "word_id": lm.word_id}
                for lm in self.landmarks
            ],
            "frames": [
                {
                    "id": f.id,
                    "timestamp": f.timestamp,
                    "center": f.gt_pose.center.tolist(),
                    "rotation": f.gt_pose.rotation.tolist(),
                    "observations": [
                        {"landmark_id": lm_id, "ray": ray.tolist()} for lm_id, ray in f.observations
                    ],
                }
                for f in self.frames
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _rng(seed: int, *salts: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFF, *salts])


def _walk_polyline(waypoints: np.ndarray, distances: np.ndarray) -> np.ndarray:
    """Positions at the given arc-length distances along a waypoint polyline."""
    segs = np.diff(waypoints, axis=0)
    seg_len = np.linalg.norm(segs, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    out = np.empty((len(distances), waypoints.shape[1]))
    for i, d in enumerate(np.clip(distances, 0.0, total)):
        k = int(np.searchsorted(cum, d, side="right")) - 1
        k = min(k, len(segs) - 1)
        frac = (d - cum[k]) / seg_len[k] if seg_len[k] > 0 else 0.0
        out[i] = waypoints[k] + frac * segs[k]
    return out


def _nadir_rotation() -> np.ndarray:
    # Camera x -> world +x, camera y (image down) -> world -y, optical axis -> world -z.
    return np.diag([1.0, -1.0, -1.0])


def _forward_rotation(forward: np.ndarray) -> np.ndarray:
    """Camera looking along `forward` (horizontal), image-down = world -z."""
    f = np.asarray(forward, dtype=float)
    f = f / np.linalg.norm(f)
    up = np.array([0.0, 0.0, 1.0])
    x_cam = np.cross(f, up)
    x_cam /= np.linalg.norm(x_cam)
    y_cam = -up
    return np.column_stack([x_cam, y_cam, f])


def _uav_trajectory(cfg: ScenarioConfig) -> list[Pose]:
    g = cfg.geometry
    waypoints = []
    for k in range(g.strip_count):
        y = k * g.strip_spacing_m
        if k % 2 == 0:
            waypoints.append([0.0, y, g.altitude_m])
            waypoints.append([g.strip_length_m, y, g.altitude_m])
        else:
            waypoints.append([g.strip_length_m, y, g.altitude_m])
            waypoints.append([0.0, y, g.altitude_m])
    waypoints = np.asarray(waypoints)
    dist = np.arange(cfg.frame_count) * g.speed_m_per_frame
    pos = _walk_polyline(waypoints, dist)
    if g.wiggle_amp_m > 0:
        # Lateral serpentine keeps strip centers non-collinear for alignment.
        pos[:, 1] = pos[:, 1] + g.wiggle_amp_m * np.sin(2 * np.pi * dist / g.wiggle_period_m)
    rot = _nadir_rotation()
    return [Pose(rot, p) for p in pos]


def _loop_trajectory(cfg: ScenarioConfig) -> list[Pose]:
    g = cfg.geometry
    w, h = g.loop_width_m, g.loop_height_m
    lap = [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]]
    perimeter = 2 * (w + h)
    total = cfg.frame_count * g.speed_m_per_frame
    laps = max(int(total // perimeter) + 2, 2)
    corners = np.array(lap * laps + [[0.0, 0.0]])
    waypoints = np.column_stack([corners, np.full(len(corners), g.camera_height_m)])
    dist = np.arange(cfg.frame_count) * g.speed_m_per_frame
    pos = _walk_polyline(waypoints, dist)
    n = cfg.frame_count
    k = max(int(g.heading_smooth_frames), 1)
    poses = []
    for i in range(n):
        # Central difference over +-k frames turns the heading gradually
        # through corners instead of snapping at the vertex.
        lo, hi = max(i - k, 0), min(i + k, n - 1)
        forward = pos[hi] - pos[lo] if hi > lo else np.array([1.0, 0.0, 0.0])
        forward = forward.copy()
        forward[2] = 0.0
        if np.linalg.norm(forward) < 1e-9:
            forward = np.array([1.0, 0.0, 0.0])
        if g.wiggle_amp_m > 0:
            p = pos[i].copy()
            side = np.cross(np.array([0.0, 0.0, 1.0]), forward / np.linalg.norm(forward))
            p += g.wiggle_amp_m * math.sin(2 * np.pi * dist[i] / g.wiggle_period_m) * side
        else:
            p = pos[i]
        poses.append(Pose(_forward_rotation(forward), p))
    return poses


def _room_trajectory(cfg: ScenarioConfig) -> list[Pose]:
    g = cfg.geometry
    angles = np.radians(np.linspace(0.0, g.orbit_total_deg, max(cfg.frame_count, 1), endpoint=False))
    poses = []
    for a in angles:
        outward = np.array([math.cos(a), math.sin(a), 0.0])
        center = g.orbit_radius_m * outward + np.array([0.0, 0.0, g.camera_height_m])
        poses.append(Pose(_forward_rotation(outward), center))
    return poses


def _uav_landmarks(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    g = cfg.geometry
    # Ground footprint radius of the nadir camera, plus the lateral wiggle.
    margin = g.altitude_m * math.tan(math.radians(cfg.camera_fov_deg / 2)) + g.wiggle_amp_m
    xs = rng.uniform(-margin, g.strip_length_m + margin, cfg.landmark_count)
    ys = rng.uniform(-margin, (g.strip_count - 1) * g.strip_spacing_m + margin, cfg.landmark_count)
    zs = rng.uniform(0.0, g.terrain_relief_m, cfg.landmark_count)
    return np.column_stack([xs, ys, zs])


def _loop_landmarks(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    g = cfg.geometry
    band = g.landmark_band_m
    xs = rng.uniform(-band, g.loop_width_m + band, cfg.landmark_count)
    ys = rng.uniform(-band, g.loop_height_m + band, cfg.landmark_count)
    zs = rng.uniform(0.0, g.landmark_max_height_m, cfg.landmark_count)
    return np.column_stack([xs, ys, zs])


def _room_landmarks(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    g = cfg.geometry
    a = g.room_half_m
    wall = rng.integers(0, 4, cfg.landmark_count)
    u = rng.uniform(-a, a, cfg.landmark_count)
    z = rng.uniform(0.2, 2.8, cfg.landmark_count)
    pts = np.empty((cfg.landmark_count, 3))
    pts[:, 2] = z
    for k in range(cfg.landmark_count):
        if wall[k] == 0:
            pts[k, :2] = (a, u[k])
        elif wall[k] == 1:
            pts[k, :2] = (-a, u[k])
        elif wall[k] == 2:
            pts[k, :2] = (u[k], a)
        else:
            pts[k, :2] = (u[k], -a)
    return pts


_TRAJECTORY_BUILDERS = {
    "uav_s_curve": (_uav_trajectory, _uav_landmarks),
    "street_loop": (_loop_trajectory, _loop_landmarks),
    "indoor_room": (_room_trajectory, _room_landmarks),
}


def _failure_window_index(cfg: ScenarioConfig, frame_id: int) -> bool:
    return any(start <= frame_id < end for start, end in cfg.failure_windows)


def generate_world(config: ScenarioConfig) -> World:
    """Build the deterministic world for a scenario config."""
    config.validate()
    traj_builder, lm_builder = _TRAJECTORY_BUILDERS[config.trajectory_kind]

    positions = lm_builder(config, _rng(config.rng_seed, _SALT_LANDMARKS))
    word_ids = _rng(config.rng_seed, _SALT_WORDS).integers(
        0, config.vocabulary_size, config.landmark_count
    )
    landmarks = [Landmark(i, positions[i], int(word_ids[i])) for i in range(config.landmark_count)]

    trajectory = traj_builder(config) if config.frame_count > 0 else []

    cos_half_fov = math.cos(math.radians(config.camera_fov_deg / 2))
    frames = []
    for i, pose in enumerate(trajectory):
        cam = (positions - pose.translation) @ pose.rotation if config.landmark_count else np.zeros((0, 3))
        dist = np.linalg.norm(cam, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            visible = (
                (cam[:, 2] > 0.01)
                & (dist <= config.max_view_range_m)
                & (cam[:, 2] / np.maximum(dist, 1e-12) >= cos_half_fov)
            )
        idx = np.flatnonzero(visible)
        if _failure_window_index(config, i) and len(idx) > 0:
            n_drop = int(round(config.observation_dropout_in_failure * len(idx)))
            if n_drop > 0:
                drop = _rng(config.rng_seed, _SALT_DROPOUT, i).choice(len(idx), n_drop, replace=False)
                keep = np.ones(len(idx), dtype=bool)
                keep[drop] = False
                idx = idx[keep]
        rays = cam[idx] / np.maximum(dist[idx, None], 1e-12)
        observations = [(int(j), rays[k]) for k, j in enumerate(idx)]
        words = Counter(int(word_ids[j]) for j in idx)
        frames.append(Frame(i, round(i * 0.1, 6), pose, observations, words))

    return World(config, landmarks, trajectory, frames)


def word_overlap_ratio(frame_a: Frame, frame_b: Frame) -> float:
    """Shared observed-landmark fraction, measured against frame_a."""
    if not frame_a.observed_ids:
        raise EmptyFrame(f"frame {frame_a.id} has no observations")
    shared = frame_a.observed_ids & frame_b.observed_ids
    return len(shared) / len(frame_a.observed_ids)
