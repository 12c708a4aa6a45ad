"""Session (tracking/merging) configuration with fail-closed parsing."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .errors import InvalidConfig


@dataclass
class NoiseConfig:
    pose_sigma_m: float = 0.0
    point_sigma_m: float = 0.0

    @classmethod
    def from_dict(cls, raw: dict) -> "NoiseConfig":
        known = {f.name for f in fields(cls)}
        for key in raw:
            if key not in known:
                raise InvalidConfig(f"noise.{key}", "unknown field")
        cfg = cls(**raw)
        if cfg.pose_sigma_m < 0 or cfg.point_sigma_m < 0:
            raise InvalidConfig("noise", "sigmas must be non-negative")
        return cfg

    def to_dict(self) -> dict:
        return {"pose_sigma_m": self.pose_sigma_m, "point_sigma_m": self.point_sigma_m}


@dataclass
class SessionConfig:
    """Knobs of the tracking state machine and the merge executor."""

    min_init_landmarks: int = 20
    min_init_parallax_deg: float = 1.0
    min_track_landmarks: int = 12
    fail_streak: int = 5
    keyframe_stride: int = 5
    query_stride: int = 1
    min_shared_points: int = 5
    strength_threshold: float = 12.0
    merge_residual_cap: float = 0.75

    @classmethod
    def from_dict(cls, raw: dict) -> "SessionConfig":
        known = {f.name for f in fields(cls)}
        for key in raw:
            if key not in known:
                raise InvalidConfig(f"session.{key}", "unknown field")
        cfg = cls(**raw)
        if cfg.fail_streak < 1:
            raise InvalidConfig("session.fail_streak", "must be >= 1")
        if cfg.keyframe_stride < 1:
            raise InvalidConfig("session.keyframe_stride", "must be >= 1")
        if cfg.query_stride < 1:
            raise InvalidConfig("session.query_stride", "must be >= 1")
        if cfg.min_shared_points < 3:
            raise InvalidConfig("session.min_shared_points", "must be >= 3")
        if cfg.min_init_landmarks < 3:
            raise InvalidConfig("session.min_init_landmarks", "must be >= 3")
        return cfg

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}
