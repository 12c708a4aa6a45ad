"""Command-line client of the mapstitch service.

By default every subcommand talks to an in-process instance of the HTTP
service; pass --server to target a running deployment instead.  Exit
codes: 0 success, 2 configuration error, 3 internal error, 4 dominance
regression in `compare`.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTERNAL = 3
EXIT_DOMINANCE = 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _request(client, method: str, path: str, **kwargs):
    try:
        response = getattr(client, method)(path, **kwargs)
    except Exception as exc:  # connection errors against --server
        raise CliError(EXIT_INTERNAL, f"service request failed: {exc}") from exc
    if response.status_code in (400, 404, 422):
        try:
            detail = response.json().get("detail")
        except Exception:
            detail = response.text
        if isinstance(detail, list):  # pydantic validation errors
            parts = []
            for err in detail:
                loc = ".".join(str(p) for p in err.get("loc", []) if p != "body")
                parts.append(f"{loc}: {err.get('msg')}")
            detail = "; ".join(parts)
        raise CliError(EXIT_CONFIG, f"configuration error: {detail}")
    if response.status_code >= 500:
        raise CliError(EXIT_INTERNAL, f"internal service error: {response.text}")
    return response.json()


def _scenario_payload(scenario_arg: str) -> dict:
    """Map the scenario argument to a request payload.

    A readable file wins; otherwise the argument is tried as a bundled
    scenario name.
    """
    path = Path(scenario_arg)
    if path.is_file():
        try:
            scenario = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_CONFIG, f"configuration error: {path}: invalid JSON: {exc}")
        if not isinstance(scenario, dict):
            raise CliError(EXIT_CONFIG, f"configuration error: {path}: expected a JSON object")
        return {"scenario": scenario}
    if path.suffix == "" and "/" not in scenario_arg:
        return {"scenario_name": scenario_arg}
    raise CliError(EXIT_CONFIG, f"configuration error: scenario file not found: {scenario_arg}")


def _overrides(args) -> dict:
    overrides = {}
    if getattr(args, "strength_threshold", None) is not None:
        overrides["strength_threshold"] = args.strength_threshold
    if getattr(args, "fail_streak", None) is not None:
        overrides["fail_streak"] = args.fail_streak
    return overrides


def _write(out_dir: Path, name: str, text: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text, encoding="utf-8")


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def cmd_run(args) -> int:
    payload = _scenario_payload(args.scenario)
    payload.update(
        mode=args.mode,
        seed=args.seed,
        deterministic=args.deterministic,
        overrides=_overrides(args),
    )
    with _client(args.server) as client:
        result = _request(client, "post", "/run", json=payload)
    out = Path(args.out)
    report = result["report"]
    _write(out, "report.json", _dump_json(report))
    _write(out, "trajectory_estimated.txt", result["tum_estimated"])
    _write(out, "trajectory_ground_truth.txt", result["tum_ground_truth"])
    _write(out, "graph.dot", result["graph_dot"])
    _write(out, "events.jsonl",
           "".join(json.dumps(e, sort_keys=True) + "\n" for e in report["events"]))
    print(f"run complete: mode={report['mode']} keyframes={report['keyframes_retained']} "
          f"final_maps={report['submap_count_final']} "
          f"ate_rmse_cm={report['ate_rmse_cm']}")
    print(f"artifacts written to {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    payload = _scenario_payload(args.scenario)
    payload.update(seed=args.seed, deterministic=args.deterministic, overrides=_overrides(args))
    with _client(args.server) as client:
        result = _request(client, "post", "/compare", json=payload)
    out = Path(args.out)
    _write(out, "report_proposed.json", _dump_json(result["report_proposed"]))
    _write(out, "report_baseline.json", _dump_json(result["report_baseline"]))
    _write(out, "comparison.txt", result["text"])
    _write(out, "comparison.csv", result["csv"])
    print(result["text"], end="")
    if not result["dominance_ok"]:
        print("dominance property violated", file=sys.stderr)
        return EXIT_DOMINANCE
    return EXIT_OK


def cmd_export_graph(args) -> int:
    path = Path(args.report)
    if not path.is_file():
        raise CliError(EXIT_CONFIG, f"configuration error: report file not found: {path}")
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_CONFIG, f"configuration error: {path}: invalid JSON: {exc}")
    if not isinstance(report, dict):
        raise CliError(EXIT_CONFIG, f"configuration error: {path}: expected a JSON object")
    with _client(args.server) as client:
        result = _request(client, "post", "/graph-dot", json={"report": report})
    print(result["dot"], end="")
    return EXIT_OK


def cmd_query(args) -> int:
    payload = _scenario_payload(args.scenario)
    payload.update(frame_id=args.frame, seed=args.seed)
    with _client(args.server) as client:
        result = _request(client, "post", "/query", json=payload)
    if not result["tracked"]:
        print(f"frame {result['frame_id']}: not tracked (no retrieval ran)")
        return EXIT_OK
    if result["thresholds"] is None:
        print(f"frame {result['frame_id']}: tracked, but no retrieval ran "
              f"(empty submap stack or insufficient map history)")
        return EXIT_OK
    th = result["thresholds"]
    print(f"frame {result['frame_id']}: word_ratio={th['word_ratio']:.3f} "
          f"score_ratio={th['score_ratio']:.3f} "
          f"(adjacent words={th['adjacent_common_words']} score={th['adjacent_score']:.3f}, "
          f"nearby words={th['nearby_common_words']} score={th['nearby_score']:.3f})")
    if not result["matches"]:
        print("no connected frames")
    for m in result["matches"]:
        print(f"  submap {m['matched_submap_id']} frame {m['matched_frame_id']}: "
              f"common_words={m['common_words']} score={m['score']:.3f}")
    return EXIT_OK


def cmd_gen_scenario(args) -> int:
    with _client(args.server) as client:
        scenario = _request(client, "get", f"/scenarios/{args.name}")
    text = _dump_json(scenario)
    if args.out == "-":
        print(text, end="")
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mapstitch",
        description="Submap-based map restoration engine: run synthetic SLAM "
                    "sessions, compare against the relocalization baseline, "
                    "and export run artifacts.",
    )
    parser.add_argument("--server", default=None,
                        help="URL of a running mapstitch service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario and write artifacts")
    run_p.add_argument("scenario", help="scenario JSON file or bundled scenario name")
    run_p.add_argument("--mode", default="proposed",
                       choices=["proposed", "relocalization_baseline", "baseline"])
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--out", default="out")
    run_p.add_argument("--deterministic", action="store_true",
                       help="suppress timestamps for byte-stable artifacts")
    run_p.add_argument("--strength-threshold", type=float, default=None)
    run_p.add_argument("--fail-streak", type=int, default=None)
    run_p.set_defaults(func=cmd_run)

    cmp_p = sub.add_parser("compare", help="run both modes and compare them")
    cmp_p.add_argument("scenario")
    cmp_p.add_argument("--seed", type=int, default=None)
    cmp_p.add_argument("--out", default="out")
    cmp_p.add_argument("--deterministic", action="store_true")
    cmp_p.add_argument("--strength-threshold", type=float, default=None)
    cmp_p.add_argument("--fail-streak", type=int, default=None)
    cmp_p.set_defaults(func=cmd_compare)

    exp_p = sub.add_parser("export-graph", help="print a report's submap graph as DOT")
    exp_p.add_argument("report", help="report.json produced by run")
    exp_p.set_defaults(func=cmd_export_graph)

    query_p = sub.add_parser("query", help="print retrieval matches for one frame")
    query_p.add_argument("scenario")
    query_p.add_argument("--frame", type=int, required=True)
    query_p.add_argument("--seed", type=int, default=None)
    query_p.set_defaults(func=cmd_query)

    gen_p = sub.add_parser("gen-scenario", help="write a bundled scenario config to a file")
    gen_p.add_argument("name")
    gen_p.add_argument("--out", default="-")
    gen_p.set_defaults(func=cmd_gen_scenario)

    serve_p = sub.add_parser("serve", help="start the HTTP service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except Exception as exc:  # invariant violations and unexpected faults
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
