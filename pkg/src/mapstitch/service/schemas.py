"""Pydantic request/response models of the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field, model_validator


class RunOverrides(BaseModel):
    """Optional knobs layered over the scenario's session config."""

    strength_threshold: Optional[float] = None
    fail_streak: Optional[int] = Field(default=None, ge=1)


class RunRequest(BaseModel):
    scenario: Optional[dict] = None
    scenario_name: Optional[str] = None
    mode: str = "proposed"
    seed: Optional[int] = None
    deterministic: bool = True
    overrides: RunOverrides = Field(default_factory=RunOverrides)
    capture_query_frame: Optional[int] = None

    @model_validator(mode="after")
    def _exactly_one_scenario(self):
        if (self.scenario is None) == (self.scenario_name is None):
            raise ValueError("provide exactly one of scenario, scenario_name")
        return self


class RunResponse(BaseModel):
    report: dict
    tum_estimated: str
    tum_ground_truth: str
    graph_dot: str


class CompareRequest(BaseModel):
    scenario: Optional[dict] = None
    scenario_name: Optional[str] = None
    seed: Optional[int] = None
    deterministic: bool = True
    overrides: RunOverrides = Field(default_factory=RunOverrides)

    @model_validator(mode="after")
    def _exactly_one_scenario(self):
        if (self.scenario is None) == (self.scenario_name is None):
            raise ValueError("provide exactly one of scenario, scenario_name")
        return self


class CompareResponse(BaseModel):
    report_proposed: dict
    report_baseline: dict
    table: dict
    text: str
    csv: str
    dominance_ok: bool


class QueryRequest(BaseModel):
    scenario: Optional[dict] = None
    scenario_name: Optional[str] = None
    frame_id: int
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _exactly_one_scenario(self):
        if (self.scenario is None) == (self.scenario_name is None):
            raise ValueError("provide exactly one of scenario, scenario_name")
        return self


class QueryResponse(BaseModel):
    frame_id: int
    tracked: bool
    thresholds: Optional[dict]
    matches: list


class GraphDotRequest(BaseModel):
    report: dict


class GraphDotResponse(BaseModel):
    dot: str


class ScenarioListResponse(BaseModel):
    scenarios: list[str]


class HealthResponse(BaseModel):
    status: str
    version: str
