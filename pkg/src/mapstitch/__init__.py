"""mapstitch: submap-based map restoration for multi-session monocular SLAM.

When tracking fails, the current map is stacked and a new submap is opened
instead of discarding frames; submaps are later reconnected via adaptive
bag-of-words retrieval, scored by a connection-strength factor, selected by
a minimum spanning tree over the weighted submap graph, and merged through
similarity transforms into one global map.  A deterministic synthetic-
session simulator provides desk-scale verification against a
relocalization-only baseline.
"""

__version__ = "0.1.0"

from .config import SessionConfig
from .geometry import Pose, SimilarityTransform
from .metrics import RunReport, compare_modes, compare_scenario, run_report
from .scene_sim import ScenarioConfig, World, generate_world
from .session import MODE_BASELINE, MODE_PROPOSED, run_session

__all__ = [
    "MODE_BASELINE",
    "MODE_PROPOSED",
    "Pose",
    "RunReport",
    "ScenarioConfig",
    "SessionConfig",
    "SimilarityTransform",
    "World",
    "compare_modes",
    "compare_scenario",
    "generate_world",
    "run_report",
    "run_session",
]
