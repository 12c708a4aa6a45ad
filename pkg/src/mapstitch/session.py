"""Online tracking state machine: init, orientation, submap stacking, merging.

Two modes share one engine.  In ``proposed`` mode a tracking failure pushes
the current map onto the stack of stranded submaps and reinitializes a new
map, which is later reconnected through retrieval and merged.  In
``relocalization_baseline`` mode the engine mimics the classic behaviour:
after a failure it stays lost and discards frames until a frame can be
relocalized against the single existing map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SessionConfig
from .errors import EmptyFrame, InsufficientHistory, OutOfOrderFrame, ZeroBaseline
from .geometry import Pose, SimilarityTransform, intersection_angles, random_rotation
from .graph_merge import SubmapGraph, attempt_merges
from .retrieval import (
    AdaptiveThresholds,
    compute_thresholds,
    retrieve_connected_frames,
    select_adjacent_and_nearby50,
)
from .scene_sim import Frame, World
from .submap import Submap

MODE_PROPOSED = "proposed"
MODE_BASELINE = "relocalization_baseline"

STATUS_INITIALIZING = "initializing"
STATUS_TRACKING = "tracking"
STATUS_LOST = "lost"

_SALT_POSE = 21
_SALT_POINT = 22
_SALT_GAUGE = 23


@dataclass
class SessionEvent:
    kind: str
    frame_id: int
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "frame_id": self.frame_id, "details": self.details}


@dataclass
class QueryCapture:
    frame_id: int
    tracked: bool = False
    thresholds: AdaptiveThresholds | None = None
    matches: list = field(default_factory=list)


class Session:
    """Drives frames through the state machine and owns all submaps."""

    def __init__(self, cfg: SessionConfig, seed: int, mode: str = MODE_PROPOSED,
                 noise_pose_sigma: float = 0.0, noise_point_sigma: float = 0.0,
                 capture_query_frame: int | None = None):
        if mode not in (MODE_PROPOSED, MODE_BASELINE):
            raise ValueError(f"unknown mode {mode!r}")
        self.cfg = cfg
        self.seed = seed
        self.mode = mode
        self.pose_sigma = noise_pose_sigma
        self.point_sigma = noise_point_sigma
        self.stack: list[Submap] = []
        self.graph = SubmapGraph()
        self.events: list[SessionEvent] = []
        self.status = STATUS_INITIALIZING
        self.consecutive_failures = 0
        self.last_frame_id = -1
        self.tracked_counter = 0
        self.counts = {
            "frames_total": 0,
            "init_buffered": 0,
            "tracked": 0,
            "discarded_fail_streak": 0,
            "discarded_lost": 0,
        }
        self.lifecycle: dict[int, dict] = {}
        self._next_submap_id = 0
        self.capture = QueryCapture(capture_query_frame) if capture_query_frame is not None else None
        self.world_landmarks: list = []
        self.current_map = self._new_submap(created_frame_id=0)

    # ----- deterministic simulation noise -------------------------------

    def _rng(self, *salts: int) -> np.random.Generator:
        return np.random.default_rng([self.seed & 0xFFFFFFFF, *salts])

    def _estimated_world_pose(self, frame: Frame) -> Pose:
        """Ground-truth pose with seeded center noise, before gauge transport.

        Noise is keyed by frame id only, so both modes see identical draws.
        """
        if self.pose_sigma <= 0:
            return frame.gt_pose
        noise = self._rng(_SALT_POSE, frame.id).normal(0.0, self.pose_sigma, 3)
        return Pose(frame.gt_pose.rotation, frame.gt_pose.translation + noise)

    def _estimated_point(self, submap: Submap, landmark_position, landmark_id: int) -> np.ndarray:
        pos = np.asarray(landmark_position, dtype=float)
        if self.point_sigma > 0:
            pos = pos + self._rng(_SALT_POINT, submap.id, landmark_id).normal(
                0.0, self.point_sigma, 3
            )
        return submap.gauge.apply(pos)

    def _new_submap(self, created_frame_id: int) -> Submap:
        submap_id = self._next_submap_id
        self._next_submap_id += 1
        rng = self._rng(_SALT_GAUGE, submap_id)
        # Fresh random gauge models the per-session monocular ambiguity;
        # the translation is pinned when initialization fixes the origin.
        gauge = SimilarityTransform(rng.uniform(0.5, 2.0), random_rotation(rng), np.zeros(3))
        submap = Submap(id=submap_id, gauge=gauge, created_frame_id=created_frame_id)
        self.graph.add_node(submap_id)
        self.lifecycle[submap_id] = {
            "id": submap_id,
            "created_frame_id": created_frame_id,
            "fate": "active",
            "merged_into": None,
            "merge_frame_id": None,
            "keyframes": 0,
            "map_points": 0,
        }
        return submap

    def submap_by_id(self, submap_id: int) -> Submap:
        if self.current_map.id == submap_id:
            return self.current_map
        for submap in self.stack:
            if submap.id == submap_id:
                return submap
        raise KeyError(f"submap {submap_id} is not alive")

    def drop_submap(self, submap: Submap) -> None:
        record = self.lifecycle[submap.id]
        record["fate"] = "merged"
        record["merged_into"] = self.current_map.id
        record["merge_frame_id"] = self.last_frame_id
        record["keyframes"] = len(submap.keyframes)
        record["map_points"] = len(submap.map_points)
        self.graph.note_keyframes(submap.id, len(submap.keyframes))

    # ----- spec operations ----------------------------------------------

    def try_initialize(self, submap: Submap, frame: Frame) -> bool:
        """Buffer the frame; succeed once a buffered pair has enough shared
        landmarks and parallax.  The earlier frame of the pair becomes the
        local origin."""
        cfg = self.cfg
        landmarks = self.world_landmarks
        for prev in reversed(submap.init_buffer):
            shared = sorted(prev.observed_ids & frame.observed_ids)
            if len(shared) < cfg.min_init_landmarks:
                continue
            points = np.array([landmarks[i].position for i in shared])
            angles = intersection_angles(prev.gt_pose.center, frame.gt_pose.center, points)
            if float(np.median(angles)) < cfg.min_init_parallax_deg:
                continue
            origin_pose = self._estimated_world_pose(prev)
            gauge = submap.gauge
            pinned = SimilarityTransform(
                gauge.scale,
                gauge.rotation,
                -gauge.scale * gauge.rotation @ origin_pose.center,
            )
            submap.gauge = pinned
            submap.add_tracked(prev, pinned.apply_pose(origin_pose), keyframe=True)
            submap.add_tracked(frame, pinned.apply_pose(self._estimated_world_pose(frame)), keyframe=True)
            for lm_id in shared:
                submap.map_points[lm_id] = self._estimated_point(
                    submap, landmarks[lm_id].position, lm_id
                )
            for kf, _ in submap.keyframes:
                for lm_id in kf.observed_ids:
                    submap.point_observations[lm_id] = submap.point_observations.get(lm_id, 0) + 1
            submap.initialized = True
            submap.init_buffer.clear()
            return True
        submap.init_buffer.append(frame)
        return False

    def track_frame(self, submap: Submap, frame: Frame) -> Pose | None:
        """Orient the frame against the map; None signals orientation failure."""
        cfg = self.cfg
        visible_mapped = frame.observed_ids & submap.map_points.keys()
        if len(visible_mapped) < cfg.min_track_landmarks:
            return None
        pose = submap.gauge.apply_pose(self._estimated_world_pose(frame))
        submap.tracked_successes += 1
        is_keyframe = submap.tracked_successes % cfg.keyframe_stride == 0
        submap.add_tracked(frame, pose, keyframe=is_keyframe)
        if is_keyframe:
            landmarks = self.world_landmarks
            for lm_id in frame.observed_ids:
                count = submap.point_observations.get(lm_id, 0) + 1
                submap.point_observations[lm_id] = count
                if count >= 2 and lm_id not in submap.map_points:
                    submap.map_points[lm_id] = self._estimated_point(
                        submap, landmarks[lm_id].position, lm_id
                    )
        return pose

    def relocalize_baseline(self, frame: Frame) -> bool:
        """Fixed-threshold retrieval against the single map, then the
        orientation gate; success resumes tracking in the original frame."""
        if not frame.words:
            return False
        matches = retrieve_connected_frames(frame, [self.current_map], AdaptiveThresholds.fixed())
        if not matches:
            return False
        mapped = frame.observed_ids & self.current_map.map_points.keys()
        return len(mapped) >= self.cfg.min_track_landmarks

    # ----- per-frame state machine ---------------------------------------

    def step(self, frame: Frame) -> list[SessionEvent]:
        if frame.id <= self.last_frame_id:
            raise OutOfOrderFrame(f"frame {frame.id} after frame {self.last_frame_id}")
        self.last_frame_id = frame.id
        self.counts["frames_total"] += 1
        start = len(self.events)
        if self.mode == MODE_PROPOSED:
            self._step_proposed(frame)
        else:
            self._step_baseline(frame)
        return self.events[start:]

    def _emit(self, kind: str, frame_id: int, **details) -> None:
        self.events.append(SessionEvent(kind, frame_id, details))

    def _step_proposed(self, frame: Frame) -> None:
        if not self.current_map.initialized:
            if self.try_initialize(self.current_map, frame):
                self.status = STATUS_TRACKING
                self._emit("initialized", frame.id, submap=self.current_map.id)
            else:
                self._emit("frame_discarded", frame.id, reason="initializing")
            self.counts["init_buffered"] += 1
            return

        pose = self.track_frame(self.current_map, frame)
        if pose is None:
            self.consecutive_failures += 1
            self.counts["discarded_fail_streak"] += 1
            self._emit("frame_discarded", frame.id, reason="fail_streak",
                       streak=self.consecutive_failures)
            if self.consecutive_failures >= self.cfg.fail_streak:
                self._push_current_map(frame)
            return

        self.consecutive_failures = 0
        self.counts["tracked"] += 1
        self.tracked_counter += 1
        self._emit("frame_tracked", frame.id, submap=self.current_map.id)
        if self.capture is not None and self.capture.frame_id == frame.id:
            self.capture.tracked = True
        if self.stack and self.tracked_counter % self.cfg.query_stride == 0:
            self._query_and_merge(frame)

    def _push_current_map(self, frame: Frame) -> None:
        pushed = self.current_map
        self.stack.append(pushed)
        self.lifecycle[pushed.id]["fate"] = "stacked"
        self._emit(
            "tracking_failed_submap_pushed",
            frame.id,
            submap=pushed.id,
            keyframes=len(pushed.keyframes),
            stack_size=len(self.stack),
        )
        self.consecutive_failures = 0
        self.status = STATUS_INITIALIZING
        self.current_map = self._new_submap(created_frame_id=frame.id)

    def _query_and_merge(self, frame: Frame) -> None:
        try:
            adjacent, nearby50 = select_adjacent_and_nearby50(frame, self.current_map)
            thresholds = compute_thresholds(frame, adjacent, nearby50)
        except (InsufficientHistory, ZeroBaseline, EmptyFrame):
            return
        matches = retrieve_connected_frames(frame, self.stack, thresholds)
        if self.capture is not None and self.capture.frame_id == frame.id:
            self.capture.thresholds = thresholds
            self.capture.matches = list(matches)
        if not matches:
            return
        decisions = attempt_merges(self, matches, self.cfg)
        for decision in decisions:
            if decision.accepted:
                self.lifecycle[self.current_map.id]["keyframes"] = len(self.current_map.keyframes)
                self._emit(
                    "merged",
                    frame.id,
                    source=decision.source_id,
                    target=decision.target_id,
                    strength=decision.edge.strength,
                    pair_count=decision.edge.pair_count,
                    point_count=decision.edge.point_count,
                    median_angle_deg=decision.edge.median_angle_deg,
                    residual_rms=decision.residual_rms,
                    inherited=decision.inherited,
                    stack_size=len(self.stack),
                )

    def _step_baseline(self, frame: Frame) -> None:
        if not self.current_map.initialized:
            if self.try_initialize(self.current_map, frame):
                self.status = STATUS_TRACKING
                self._emit("initialized", frame.id, submap=self.current_map.id)
            else:
                self._emit("frame_discarded", frame.id, reason="initializing")
            self.counts["init_buffered"] += 1
            return

        if self.status == STATUS_LOST:
            if self.relocalize_baseline(frame):
                self.status = STATUS_TRACKING
                self._emit("relocalized", frame.id, submap=self.current_map.id)
            else:
                self.counts["discarded_lost"] += 1
                self._emit("frame_discarded", frame.id, reason="baseline_lost")
                return

        pose = self.track_frame(self.current_map, frame)
        if pose is None:
            self.consecutive_failures += 1
            self.counts["discarded_fail_streak"] += 1
            self._emit("frame_discarded", frame.id, reason="fail_streak",
                       streak=self.consecutive_failures)
            if self.consecutive_failures >= self.cfg.fail_streak:
                self.status = STATUS_LOST
                self.consecutive_failures = 0
                self._emit("tracking_failed_submap_pushed", frame.id,
                           submap=self.current_map.id, baseline_lost=True,
                           keyframes=len(self.current_map.keyframes), stack_size=0)
            return

        self.consecutive_failures = 0
        self.counts["tracked"] += 1
        self.tracked_counter += 1
        self._emit("frame_tracked", frame.id, submap=self.current_map.id)

    # ----- whole-world drive ----------------------------------------------

    def final_maps(self) -> list[Submap]:
        return [self.current_map] + list(self.stack)

    def run(self, world: World) -> "Session":
        self.world_landmarks = world.landmarks
        for frame in world.frames:
            self.step(frame)
        for submap in self.final_maps():
            self.lifecycle[submap.id]["keyframes"] = len(submap.keyframes)
            self.lifecycle[submap.id]["map_points"] = len(submap.map_points)
            self.graph.note_keyframes(submap.id, len(submap.keyframes))
        return self


def run_session(world: World, cfg: SessionConfig | None = None, mode: str = MODE_PROPOSED,
                capture_query_frame: int | None = None) -> Session:
    """Drive a full world through a fresh session and return the engine."""
    cfg = cfg or world.config.session
    session = Session(
        cfg,
        seed=world.config.rng_seed,
        mode=mode,
        noise_pose_sigma=world.config.noise.pose_sigma_m,
        noise_point_sigma=world.config.noise.point_sigma_m,
        capture_query_frame=capture_query_frame,
    )
    return session.run(world)
