"""Deterministic simulator for gesture- and language-guided indoor robot
navigation: pointing estimation from simulated monocular perception,
occupancy-grid planning, language grounding with ray disambiguation, and a
replayable episode pipeline."""

from .geometry import CameraIntrinsics, Pose2, Ray3, Transform3
from .grid import OccupancyGrid, inflate, plan, raycast
from .pipeline import CommandEvent, FailReason, Phase, Pipeline, PipelineConfig
from .scenario import RunReport, ScenarioSpec, batch, load_scenario, run
from .world import (
    InstructorModel,
    NoiseConfig,
    RngStreams,
    RobotState,
    SimObject,
    WorldModel,
)

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics", "Pose2", "Ray3", "Transform3",
    "OccupancyGrid", "inflate", "plan", "raycast",
    "CommandEvent", "FailReason", "Phase", "Pipeline", "PipelineConfig",
    "RunReport", "ScenarioSpec", "batch", "load_scenario", "run",
    "InstructorModel", "NoiseConfig", "RngStreams", "RobotState",
    "SimObject", "WorldModel",
]
