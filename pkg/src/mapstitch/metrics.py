"""Trajectory-integrity and trajectory-error evaluation plus run reports.

Integrity is the number of keyframes retained in the final map set.  The
error metric is absolute trajectory error of camera centers after a global
similarity alignment to ground truth, reported in centimeters; when several
disconnected components remain, each is aligned independently and the
squared residuals are pooled.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import DegenerateConfiguration, ScenarioMismatch
from .geometry import estimate_similarity
from .scene_sim import ScenarioConfig, World, generate_world
from .session import MODE_BASELINE, MODE_PROPOSED, Session, run_session
from .tum import rotation_to_quat

REPORT_SCHEMA_VERSION = 1


def trajectory_integrity(maps) -> int:
    """Total keyframes across all retained maps."""
    return sum(len(m.keyframes) for m in maps)


def ate_rmse(estimated, ground_truth) -> float:
    """RMSE (cm) of camera-center residuals after similarity alignment.

    Both arguments are lists of (frame_id, Pose); alignment uses the frame
    ids common to both.  Raises DegenerateConfiguration for fewer than 3
    common frames or collinear positions.
    """
    gt_by_id = {fid: pose for fid, pose in ground_truth}
    common = [(fid, pose) for fid, pose in estimated if fid in gt_by_id]
    if len(common) < 3:
        raise DegenerateConfiguration(f"only {len(common)} common frames, need >= 3")
    est_centers = np.array([pose.center for _, pose in common])
    gt_centers = np.array([gt_by_id[fid].center for fid, _ in common])
    transform, _ = estimate_similarity(est_centers, gt_centers)
    residuals = gt_centers - transform.apply(est_centers)
    return float(np.sqrt((residuals ** 2).sum(axis=1).mean()) * 100.0)


def pooled_ate_rmse(components, ground_truth):
    """Pool per-component aligned squared residuals into one RMSE (cm).

    ``components`` is a list of estimated (frame_id, Pose) lists, one per
    disconnected map component.  Components too small or degenerate to
    align are skipped.  Returns (rmse_cm or None, used_components,
    aligned_frames, skipped_components).
    """
    gt_by_id = {fid: pose for fid, pose in ground_truth}
    total_sq = 0.0
    total_n = 0
    used = 0
    skipped = 0
    for estimated in components:
        common = [(fid, pose) for fid, pose in estimated if fid in gt_by_id]
        if len(common) < 3:
            skipped += 1
            continue
        est_centers = np.array([pose.center for _, pose in common])
        gt_centers = np.array([gt_by_id[fid].center for fid, _ in common])
        try:
            transform, _ = estimate_similarity(est_centers, gt_centers)
        except DegenerateConfiguration:
            skipped += 1
            continue
        residuals = gt_centers - transform.apply(est_centers)
        total_sq += float((residuals ** 2).sum())
        total_n += len(common)
        used += 1
    if total_n == 0:
        return None, 0, 0, skipped
    return float(np.sqrt(total_sq / total_n) * 100.0), used, total_n, skipped


@dataclass
class RunReport:
    """Serializable summary of one session run; replay-identical per seed."""

    schema_version: int
    scenario_name: str
    mode: str
    seed: int
    deterministic: bool
    generated_at: str | None
    keyframes_retained: int
    submap_count_final: int
    submaps_created: int
    merge_events: list
    ate_rmse_cm: float | None
    ate_component_count: int
    ate_aligned_keyframes: int
    ate_skipped_components: int
    counts: dict
    per_submap: list
    config: dict
    graph: dict
    trajectory: dict
    events: list
    query_capture: dict | None = None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, raw: dict) -> "RunReport":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown report fields: {sorted(unknown)}")
        return cls(**raw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))


def _pose_row(frame_id: int, timestamp: float, pose, component: int | None = None) -> list:
    quat = rotation_to_quat(pose.rotation)
    row = [int(frame_id), float(timestamp), *[float(v) for v in pose.translation],
           *[float(v) for v in quat]]
    if component is not None:
        row.append(int(component))
    return row


def build_report(session: Session, world: World, deterministic: bool = True,
                 events_in_report: bool = True) -> RunReport:
    """Assemble the run report from a completed session."""
    final_maps = sorted(session.final_maps(), key=lambda m: m.id)
    est_rows = []
    components = []
    for comp_index, submap in enumerate(final_maps):
        comp = [(f.id, pose) for f, pose in submap.keyframes]
        components.append(comp)
        for f, pose in submap.keyframes:
            est_rows.append(_pose_row(f.id, f.timestamp, pose, comp_index))
    est_rows.sort(key=lambda r: r[0])
    est_ids = {row[0] for row in est_rows}
    gt_rows = [
        _pose_row(f.id, f.timestamp, f.gt_pose) for f in world.frames if f.id in est_ids
    ]

    gt_poses = [(f.id, f.gt_pose) for f in world.frames]
    rmse_cm, used, aligned, skipped = pooled_ate_rmse(components, gt_poses)

    snapshot = session.graph.snapshot(session.submap_by_id, session.cfg.min_shared_points)
    capture = None
    if session.capture is not None:
        cap = session.capture
        capture = {
            "frame_id": cap.frame_id,
            "tracked": cap.tracked,
            "thresholds": None
            if cap.thresholds is None
            else {
                "word_ratio": cap.thresholds.word_ratio,
                "score_ratio": cap.thresholds.score_ratio,
                "adjacent_common_words": cap.thresholds.adjacent_common_words,
                "nearby_common_words": cap.thresholds.nearby_common_words,
                "adjacent_score": cap.thresholds.adjacent_score,
                "nearby_score": cap.thresholds.nearby_score,
            },
            "matches": [
                {
                    "query_frame_id": m.query_frame_id,
                    "matched_frame_id": m.matched_frame_id,
                    "matched_submap_id": m.matched_submap_id,
                    "common_words": m.common_words,
                    "score": m.score,
                }
                for m in cap.matches
            ],
        }

    return RunReport(
        schema_version=REPORT_SCHEMA_VERSION,
        scenario_name=world.config.name,
        mode=session.mode,
        seed=world.config.rng_seed,
        deterministic=deterministic,
        generated_at=None if deterministic else _dt.datetime.now(_dt.timezone.utc).isoformat(),
        keyframes_retained=trajectory_integrity(final_maps),
        submap_count_final=len(final_maps),
        submaps_created=len(session.lifecycle),
        merge_events=[e.to_dict() for e in session.events if e.kind == "merged"],
        ate_rmse_cm=rmse_cm,
        ate_component_count=used,
        ate_aligned_keyframes=aligned,
        ate_skipped_components=skipped,
        counts=dict(session.counts),
        per_submap=[session.lifecycle[k] for k in sorted(session.lifecycle)],
        config=world.config.to_dict(),
        graph=snapshot,
        trajectory={"estimated": est_rows, "ground_truth": gt_rows},
        events=[e.to_dict() for e in session.events] if events_in_report else [],
        query_capture=capture,
    )


def run_report(config: ScenarioConfig, mode: str = MODE_PROPOSED, deterministic: bool = True,
               capture_query_frame: int | None = None) -> RunReport:
    """Generate the world, run the session, and report."""
    world = generate_world(config)
    session = run_session(world, config.session, mode, capture_query_frame)
    return build_report(session, world, deterministic)


@dataclass
class ComparisonTable:
    """Side-by-side integrity and error comparison of the two modes."""

    scenario_name: str
    seed: int
    rows: list
    dominance_ok: bool
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "scenario_name": self.scenario_name,
            "seed": self.seed,
            "rows": self.rows,
            "dominance_ok": self.dominance_ok,
            "notes": self.notes,
        }

    def to_text(self) -> str:
        name_w = max([len(r["metric"]) for r in self.rows] + [len("metric")])
        def fmt(v):
            if v is None:
                return "n/a"
            if isinstance(v, float):
                return f"{v:.3f}"
            return str(v)
        lines = [
            f"scenario: {self.scenario_name} (seed {self.seed})",
            f"{'metric'.ljust(name_w)}  {'baseline':>14}  {'proposed':>14}",
        ]
        for r in self.rows:
            lines.append(
                f"{r['metric'].ljust(name_w)}  {fmt(r['baseline']):>14}  {fmt(r['proposed']):>14}"
            )
        lines.append(f"dominance_ok: {self.dominance_ok}")
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["metric,baseline,proposed"]
        for r in self.rows:
            base = "" if r["baseline"] is None else r["baseline"]
            prop = "" if r["proposed"] is None else r["proposed"]
            lines.append(f"{r['metric']},{base},{prop}")
        return "\n".join(lines) + "\n"


def _components_from_report(report: RunReport) -> list:
    from .geometry import Pose
    from .tum import quat_to_rotation

    by_component: dict[int, list] = {}
    for row in report.trajectory["estimated"]:
        frame_id, _, tx, ty, tz, qx, qy, qz, qw, comp = row
        pose = Pose(quat_to_rotation([qx, qy, qz, qw]), np.array([tx, ty, tz]))
        by_component.setdefault(int(comp), []).append((int(frame_id), pose))
    return [by_component[k] for k in sorted(by_component)]


def _gt_from_report(report: RunReport) -> list:
    from .geometry import Pose
    from .tum import quat_to_rotation

    rows = []
    for row in report.trajectory["ground_truth"]:
        frame_id, _, tx, ty, tz, qx, qy, qz, qw = row
        rows.append((int(frame_id), Pose(quat_to_rotation([qx, qy, qz, qw]), np.array([tx, ty, tz]))))
    return rows


def compare_modes(report_proposed: RunReport, report_baseline: RunReport,
                  rmse_ratio_gate: float = 1.15) -> ComparisonTable:
    """Tables-2/3-shaped comparison; flags dominance violations.

    The error columns restricted to common keyframes are computed on the
    keyframes both modes retained, aligning each mode's components
    independently.
    """
    if report_proposed.scenario_name != report_baseline.scenario_name:
        raise ScenarioMismatch("reports come from different scenarios")
    if report_proposed.seed != report_baseline.seed:
        raise ScenarioMismatch("reports come from different seeds")
    if report_proposed.config != report_baseline.config:
        raise ScenarioMismatch("reports come from different configs")
    if report_proposed.mode == report_baseline.mode:
        raise ScenarioMismatch("need one proposed-mode and one baseline-mode report")

    common_ids = {row[0] for row in report_proposed.trajectory["estimated"]} & {
        row[0] for row in report_baseline.trajectory["estimated"]
    }
    gt_p = _gt_from_report(report_proposed)
    gt_b = _gt_from_report(report_baseline)
    gt_all = {fid: pose for fid, pose in gt_p + gt_b}
    gt = sorted(gt_all.items())

    def common_rmse(report):
        comps = [
            [(fid, pose) for fid, pose in comp if fid in common_ids]
            for comp in _components_from_report(report)
        ]
        rmse, _, aligned, _ = pooled_ate_rmse(comps, gt)
        return rmse, aligned

    rmse_common_p, aligned_p = common_rmse(report_proposed)
    rmse_common_b, aligned_b = common_rmse(report_baseline)

    notes = []
    dominance_ok = True
    if report_proposed.keyframes_retained < report_baseline.keyframes_retained:
        dominance_ok = False
        notes.append("proposed mode retained fewer keyframes than the baseline")
    if rmse_common_p is not None and rmse_common_b is not None:
        # Absolute slack keeps float dust in noiseless runs from tripping
        # the ratio gate (both values ~1e-11 cm there).
        if rmse_common_p > rmse_ratio_gate * rmse_common_b + 1e-9:
            dominance_ok = False
            notes.append(
                f"common-keyframe RMSE ratio exceeds {rmse_ratio_gate}: "
                f"{rmse_common_p:.3f} vs {rmse_common_b:.3f} cm"
            )

    rows = [
        {"metric": "keyframes_retained", "baseline": report_baseline.keyframes_retained,
         "proposed": report_proposed.keyframes_retained},
        {"metric": "submap_count_final", "baseline": report_baseline.submap_count_final,
         "proposed": report_proposed.submap_count_final},
        {"metric": "ate_rmse_cm", "baseline": report_baseline.ate_rmse_cm,
         "proposed": report_proposed.ate_rmse_cm},
        {"metric": "common_keyframes", "baseline": aligned_b, "proposed": aligned_p},
        {"metric": "ate_rmse_common_cm", "baseline": rmse_common_b, "proposed": rmse_common_p},
    ]
    return ComparisonTable(
        scenario_name=report_proposed.scenario_name,
        seed=report_proposed.seed,
        rows=rows,
        dominance_ok=dominance_ok,
        notes=notes,
    )


def compare_scenario(config: ScenarioConfig, deterministic: bool = True):
    """Run both modes on the same world/seed and compare them."""
    world = generate_world(config)
    session_p = run_session(world, config.session, MODE_PROPOSED)
    report_p = build_report(session_p, world, deterministic)
    world_b = generate_world(config)
    session_b = run_session(world_b, config.session, MODE_BASELINE)
    report_b = build_report(session_b, world_b, deterministic)
    return report_p, report_b, compare_modes(report_p, report_b)
