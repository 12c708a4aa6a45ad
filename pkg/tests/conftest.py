"""Shared helpers for building tiny frames and submaps by hand."""

from collections import Counter

import numpy as np
import pytest

from mapstitch.geometry import Pose, SimilarityTransform
from mapstitch.scene_sim import Frame
from mapstitch.submap import Submap


def make_frame(frame_id, observed_ids, center=(0.0, 0.0, 0.0), words=None,
               timestamp=None, rotation=None):
    """Frame with the given observed landmark ids; words default to the ids."""
    rot = np.eye(3) if rotation is None else rotation
    pose = Pose(rot, np.asarray(center, dtype=float))
    observations = [(int(i), np.array([0.0, 0.0, 1.0])) for i in observed_ids]
    if words is None:
        words = Counter(int(i) for i in observed_ids)
    elif not isinstance(words, Counter):
        words = Counter(words)
    ts = float(frame_id) * 0.1 if timestamp is None else timestamp
    return Frame(frame_id, ts, pose, observations, words)


def make_submap(submap_id, tracked, map_points=None, keyframes=None):
    """Submap from (frame, pose) pairs; all tracked frames become keyframes
    unless an explicit keyframe id list is given."""
    submap = Submap(id=submap_id, gauge=SimilarityTransform.identity(), initialized=True)
    for frame, pose in tracked:
        is_kf = keyframes is None or frame.id in keyframes
        submap.add_tracked(frame, pose, keyframe=is_kf)
    submap.map_points = {int(k): np.asarray(v, dtype=float) for k, v in (map_points or {}).items()}
    return submap


def identity_pose(center=(0.0, 0.0, 0.0)):
    return Pose(np.eye(3), np.asarray(center, dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
