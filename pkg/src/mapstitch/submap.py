"""Submap container: keyframes, map points and the hidden coordinate gauge."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, SimilarityTransform
from .scene_sim import Frame


@dataclass(eq=False)
class Submap:
    """A self-consistent local map in its own similarity gauge.

    ``gauge`` maps world coordinates into the submap's private frame; it is
    simulator bookkeeping for oracles and metrics only and must never feed
    the retrieval or merging logic.
    """

    id: int
    gauge: SimilarityTransform
    keyframes: list = field(default_factory=list)  # [(Frame, Pose in local coords)]
    frames: list = field(default_factory=list)  # every tracked (Frame, Pose), keyframes included
    map_points: dict = field(default_factory=dict)  # landmark_id -> np.ndarray (3,), local coords
    initialized: bool = False
    created_frame_id: int = -1
    tracked_successes: int = 0

    # Frames buffered while waiting for an initialization pair.
    init_buffer: list = field(default_factory=list)
    # landmark_id -> number of keyframes of this submap observing it.
    point_observations: dict = field(default_factory=dict)

    def __post_init__(self):
        self._pose_index = {f.id: pose for f, pose in self.frames}

    def keyframe_ids(self) -> list:
        return [f.id for f, _ in self.keyframes]

    def has_frame(self, frame_id: int) -> bool:
        return frame_id in self._pose_index

    def frame_pose(self, frame_id: int) -> Pose:
        try:
            return self._pose_index[frame_id]
        except KeyError:
            raise KeyError(f"frame {frame_id} not tracked in submap {self.id}") from None

    def add_tracked(self, frame: Frame, pose: Pose, keyframe: bool) -> None:
        self.frames.append((frame, pose))
        self._pose_index[frame.id] = pose
        if keyframe:
            self.keyframes.append((frame, pose))

    def transport(self, transform: SimilarityTransform) -> None:
        """Re-express every pose and map point through `transform`."""
        self.keyframes = [(f, transform.apply_pose(p)) for f, p in self.keyframes]
        self.frames = [(f, transform.apply_pose(p)) for f, p in self.frames]
        self._pose_index = {f.id: pose for f, pose in self.frames}
        self.map_points = {k: transform.apply(v) for k, v in self.map_points.items()}
        self.gauge = transform.compose(self.gauge)

    def absorb(self, other: "Submap") -> None:
        """Append another submap's content (already in this map's coordinates).

        Duplicate map points (same landmark id) are fused by midpoint.
        """
        self.keyframes.extend(other.keyframes)
        self.keyframes.sort(key=lambda kf: kf[0].id)
        self.frames.extend(other.frames)
        self.frames.sort(key=lambda fp: fp[0].id)
        self._pose_index.update(other._pose_index)
        for lm_id, pt in other.map_points.items():
            if lm_id in self.map_points:
                self.map_points[lm_id] = 0.5 * (self.map_points[lm_id] + pt)
            else:
                self.map_points[lm_id] = pt
        for lm_id, count in other.point_observations.items():
            self.point_observations[lm_id] = self.point_observations.get(lm_id, 0) + count
