import json
import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

from mapstitch import __version__
from mapstitch.presets import list_scenarios, scenario_text
from mapstitch.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


class TestMetaEndpoints:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok", "version": __version__}

    def test_scenario_listing(self, client):
        response = client.get("/scenarios")
        assert response.status_code == 200
        assert response.json()["scenarios"] == list_scenarios()

    def test_scenario_fetch(self, client):
        response = client.get("/scenarios/four_submap_gauge")
        assert response.status_code == 200
        assert response.json() == json.loads(scenario_text("four_submap_gauge"))

    def test_unknown_scenario_is_400_naming_field(self, client):
        response = client.get("/scenarios/new_york")
        assert response.status_code == 400
        assert response.json()["field"] == "name"


class TestRunEndpoint:
    def test_run_bundled_scenario(self, client):
        response = client.post("/run", json={"scenario_name": "four_submap_gauge",
                                             "deterministic": True})
        assert response.status_code == 200
        payload = response.json()
        report = payload["report"]
        assert report["mode"] == "proposed"
        assert report["submap_count_final"] == 1
        assert report["keyframes_retained"] > 0
        assert payload["tum_estimated"].count("\n") == report["keyframes_retained"]
        assert payload["graph_dot"].startswith("graph")

    def test_run_inline_scenario_with_overrides(self, client):
        scenario = json.loads(scenario_text("four_submap_gauge"))
        response = client.post("/run", json={
            "scenario": scenario, "seed": 11, "mode": "baseline",
            "overrides": {"fail_streak": 3},
        })
        assert response.status_code == 200
        report = response.json()["report"]
        assert report["mode"] == "relocalization_baseline"
        assert report["seed"] == 11
        assert report["config"]["session"]["fail_streak"] == 3

    def test_invalid_config_names_field(self, client):
        scenario = json.loads(scenario_text("four_submap_gauge"))
        scenario["frame_count"] = -5
        response = client.post("/run", json={"scenario": scenario})
        assert response.status_code == 400
        assert response.json()["field"] == "frame_count"

    def test_unknown_scenario_field_rejected(self, client):
        scenario = json.loads(scenario_text("four_submap_gauge"))
        scenario["extra_knob"] = True
        response = client.post("/run", json={"scenario": scenario})
        assert response.status_code == 400
        assert response.json()["field"] == "extra_knob"

    def test_missing_scenario_is_422(self, client):
        response = client.post("/run", json={"mode": "proposed"})
        assert response.status_code == 422

    def test_bad_mode_rejected(self, client):
        response = client.post("/run", json={"scenario_name": "four_submap_gauge",
                                             "mode": "quantum"})
        assert response.status_code == 400
        assert response.json()["field"] == "mode"


class TestCompareEndpoint:
    def test_compare_bundled(self, client):
        response = client.post("/compare", json={"scenario_name": "indoor_corridor"})
        assert response.status_code == 200
        payload = response.json()
        assert payload["dominance_ok"] is True
        assert payload["report_proposed"]["mode"] == "proposed"
        assert payload["report_baseline"]["mode"] == "relocalization_baseline"
        assert "keyframes_retained" in payload["text"]
        assert payload["csv"].startswith("metric,baseline,proposed")


class TestQueryEndpoint:
    def test_query_returns_thresholds_and_matches(self, client):
        response = client.post("/query", json={"scenario_name": "chain_9", "frame_id": 170})
        assert response.status_code == 200
        payload = response.json()
        assert payload["tracked"] is True
        # Mid-map query: the half-overlap frame shares strictly fewer words
        # than the adjacent frame, so the ratios sit strictly inside (0, 1).
        assert 0.05 <= payload["thresholds"]["word_ratio"] < 1.0
        assert 0.05 <= payload["thresholds"]["score_ratio"] < 1.0
        assert payload["matches"], "mid-tenure query frame should hit the stack"
        for match in payload["matches"]:
            assert match["common_words"] >= 1

    def test_query_untracked_frame(self, client):
        # Frame inside a full-dropout window is never tracked.
        response = client.post("/query", json={"scenario_name": "chain_9", "frame_id": 56})
        assert response.status_code == 200
        payload = response.json()
        assert payload["tracked"] is False
        assert payload["thresholds"] is None


class TestGraphDotEndpoint:
    def test_roundtrip_from_run(self, client):
        run = client.post("/run", json={"scenario_name": "four_submap_gauge"}).json()
        response = client.post("/graph-dot", json={"report": run["report"]})
        assert response.status_code == 200
        assert response.json()["dot"] == run["graph_dot"]

    def test_malformed_report_rejected(self, client):
        response = client.post("/graph-dot", json={"report": {"whatever": 1}})
        assert response.status_code == 400
