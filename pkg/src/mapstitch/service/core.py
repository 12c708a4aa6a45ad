"""Service-layer operations shared by the HTTP handlers."""

from __future__ import annotations

import dataclasses

from ..errors import InvalidConfig
from ..metrics import RunReport, build_report, compare_modes
from ..presets import load_scenario
from ..scene_sim import ScenarioConfig, generate_world
from ..session import MODE_BASELINE, MODE_PROPOSED, run_session
from ..graph_merge import snapshot_to_dot
from ..tum import format_row
from . import schemas


def resolve_scenario(scenario: dict | None, scenario_name: str | None,
                     seed: int | None, overrides: schemas.RunOverrides) -> ScenarioConfig:
    if scenario_name is not None:
        config = load_scenario(scenario_name)
    else:
        config = ScenarioConfig.from_dict(scenario)
    if seed is not None:
        config = dataclasses.replace(config, rng_seed=int(seed))
    session = config.session
    if overrides.strength_threshold is not None:
        session = dataclasses.replace(session, strength_threshold=float(overrides.strength_threshold))
    if overrides.fail_streak is not None:
        session = dataclasses.replace(session, fail_streak=int(overrides.fail_streak))
    config = dataclasses.replace(config, session=session)
    config.validate()
    return config


def _mode_name(mode: str) -> str:
    aliases = {
        "proposed": MODE_PROPOSED,
        MODE_PROPOSED: MODE_PROPOSED,
        "baseline": MODE_BASELINE,
        MODE_BASELINE: MODE_BASELINE,
    }
    if mode not in aliases:
        raise InvalidConfig("mode", f"unknown mode {mode!r}; use proposed or relocalization_baseline")
    return aliases[mode]


def tum_text(rows) -> str:
    lines = [format_row(row[1], row[2:5], row[5:9]) for row in rows]
    return "\n".join(lines) + ("\n" if lines else "")


def run(request: schemas.RunRequest) -> schemas.RunResponse:
    config = resolve_scenario(request.scenario, request.scenario_name, request.seed,
                              request.overrides)
    mode = _mode_name(request.mode)
    world = generate_world(config)
    session = run_session(world, config.session, mode,
                          capture_query_frame=request.capture_query_frame)
    report = build_report(session, world, deterministic=request.deterministic)
    return schemas.RunResponse(
        report=report.to_dict(),
        tum_estimated=tum_text(report.trajectory["estimated"]),
        tum_ground_truth=tum_text(report.trajectory["ground_truth"]),
        graph_dot=snapshot_to_dot(report.graph),
    )


def compare(request: schemas.CompareRequest) -> schemas.CompareResponse:
    config = resolve_scenario(request.scenario, request.scenario_name, request.seed,
                              request.overrides)
    reports = {}
    for mode in (MODE_PROPOSED, MODE_BASELINE):
        world = generate_world(config)
        session = run_session(world, config.session, mode)
        reports[mode] = build_report(session, world, deterministic=request.deterministic)
    table = compare_modes(reports[MODE_PROPOSED], reports[MODE_BASELINE])
    return schemas.CompareResponse(
        report_proposed=reports[MODE_PROPOSED].to_dict(),
        report_baseline=reports[MODE_BASELINE].to_dict(),
        table=table.to_dict(),
        text=table.to_text(),
        csv=table.to_csv(),
        dominance_ok=table.dominance_ok,
    )


def query(request: schemas.QueryRequest) -> schemas.QueryResponse:
    config = resolve_scenario(request.scenario, request.scenario_name, request.seed,
                              schemas.RunOverrides())
    world = generate_world(config)
    session = run_session(world, config.session, MODE_PROPOSED,
                          capture_query_frame=request.frame_id)
    report = build_report(session, world)
    capture = report.query_capture or {"frame_id": request.frame_id, "tracked": False,
                                       "thresholds": None, "matches": []}
    return schemas.QueryResponse(
        frame_id=capture["frame_id"],
        tracked=capture["tracked"],
        thresholds=capture["thresholds"],
        matches=capture["matches"],
    )


def graph_dot(request: schemas.GraphDotRequest) -> schemas.GraphDotResponse:
    try:
        report = RunReport.from_dict(request.report)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig("report", f"malformed report: {exc}") from exc
    if not isinstance(report.graph, dict) or "nodes" not in report.graph:
        raise InvalidConfig("report.graph", "report carries no graph snapshot")
    return schemas.GraphDotResponse(dot=snapshot_to_dot(report.graph))
