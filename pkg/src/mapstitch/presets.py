"""Access to the bundled scenario files."""

from __future__ import annotations

from importlib import resources

from .errors import InvalidConfig
from .scene_sim import ScenarioConfig


def _scenario_dir():
    return resources.files("mapstitch") / "scenarios"


def list_scenarios() -> list[str]:
    names = []
    for entry in _scenario_dir().iterdir():
        if entry.name.endswith(".json"):
            names.append(entry.name[: -len(".json")])
    return sorted(names)


def scenario_text(name: str) -> str:
    path = _scenario_dir() / f"{name}.json"
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InvalidConfig("name", f"unknown bundled scenario {name!r}; "
                            f"available: {', '.join(list_scenarios())}") from None


def load_scenario(name: str) -> ScenarioConfig:
    return ScenarioConfig.from_json(scenario_text(name))
