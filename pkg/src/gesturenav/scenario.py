"""Scenario files, episode execution, batch aggregation and trace I/O.

Scenario files are JSON (schema_version 1). Traces are line-delimited JSON:
one record per line, with a final terminal line carrying the outcome and
metrics. Serialization is canonical (sorted keys) so identical runs produce
byte-identical trace files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .geometry import CameraIntrinsics, Pose2, wrap_angle
from .grid import OccupancyGrid, load_pgm, parse_inline_grid
from .pipeline import CommandEvent, FailReason, Phase, Pipeline, PipelineConfig
from .world import (
    InstructorModel,
    NoiseConfig,
    RngStreams,
    RobotState,
    SimObject,
    WorldModel,
)

SCHEMA_VERSION = 1
SUCCESS_RADIUS = 1.0


@dataclass
class ScenarioSpec:
    name: str
    grid: OccupancyGrid
    objects: tuple
    instructors: tuple
    robot: RobotState
    events: tuple  # CommandEvents in time order
    noise: NoiseConfig
    seed: int
    expected_target: str | None = None
    step_budget: int = 10000
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def build_world(self) -> WorldModel:
        return WorldModel(
            grid=self.grid,
            objects=self.objects,
            instructors=self.instructors,
            robot=self.robot,
            seed=self.seed,
        )


@dataclass
class RunReport:
    scenario: str
    seed: int
    outcome: str
    reason: str | None
    success: bool
    final_distance: float
    azimuth_error: float
    steps: int
    gaze_degraded: bool

    def as_dict(self):
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "outcome": self.outcome,
            "reason": self.reason,
            "success": self.success,
            "final_distance": round(self.final_distance, 6),
            "azimuth_error": round(self.azimuth_error, 6),
            "steps": self.steps,
            "gaze_degraded": self.gaze_degraded,
        }


def load_scenario(path) -> ScenarioSpec:
    """Load and fully validate a scenario file; all violations are listed."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return scenario_from_dict(doc, name=doc.get("name", path.stem), base=path.parent)


def scenario_from_dict(doc: dict, name: str = "inline", base: Path | None = None):
    problems = []
    if doc.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        problems.append(f"unsupported schema_version {doc.get('schema_version')}")

    grid = None
    m = doc.get("map", {})
    try:
        if "rows" in m:
            grid = parse_inline_grid(
                m["rows"], m.get("resolution", 0.05), tuple(m.get("origin", (0, 0, 0)))
            )
        elif "pgm" in m:
            base = base or Path(".")
            grid = load_pgm(base / m["pgm"], base / m["meta"])
        else:
            problems.append("map: need 'rows' or 'pgm'")
    except Exception as exc:
        problems.append(f"map: {exc}")

    objects = []
    for od in doc.get("objects", []):
        try:
            objects.append(
                SimObject(
                    id=od["id"],
                    class_label=od["class"],
                    attributes=frozenset(a.lower() for a in od.get("attributes", [])),
                    footprint=tuple(od["footprint"]),
                    height=float(od.get("height", 1.0)),
                )
            )
        except Exception as exc:
            problems.append(f"object {od.get('id', '?')}: {exc}")

    instructors = []
    for idd in doc.get("instructors", []):
        try:
            bx, by, bt = idd["base"]
            instructors.append(
                InstructorModel(
                    id=idd["id"],
                    base=Pose2(bx, by, bt),
                    stature=float(idd.get("stature", 1.7)),
                    point_target=tuple(idd["point_target"]) if idd.get("point_target") else None,
                    gaze_target=tuple(idd["gaze_target"]) if idd.get("gaze_target") else None,
                )
            )
        except Exception as exc:
            problems.append(f"instructor {idd.get('id', '?')}: {exc}")

    robot = None
    try:
        rd = doc.get("robot", {})
        rx, ry, rt = rd.get("pose", (0.0, 0.0, 0.0))
        kd = rd.get("intrinsics", {})
        robot = RobotState(
            pose=Pose2(rx, ry, rt),
            camera_height=float(rd.get("camera_height", 1.2)),
            intrinsics=CameraIntrinsics(
                f_x=float(kd.get("f_x", 500.0)),
                f_y=float(kd.get("f_y", 500.0)),
                c_x=float(kd.get("c_x", 320.0)),
                c_y=float(kd.get("c_y", 240.0)),
                width=int(kd.get("width", 640)),
                height=int(kd.get("height", 480)),
            ),
            radius=float(rd.get("radius", 0.25)),
        )
    except Exception as exc:
        problems.append(f"robot: {exc}")

    events = []
    for ed in doc.get("events", []):
        try:
            events.append(
                CommandEvent(ed["instructor"], ed["utterance"], float(ed.get("t", 0.0)))
            )
        except Exception as exc:
            problems.append(f"event: {exc}")
    events.sort(key=lambda e: e.sim_time)

    noise = NoiseConfig()
    nd = doc.get("noise")
    if nd is not None:
        try:
            noise = NoiseConfig(
                joint_sigma=float(nd.get("joint_sigma", NoiseConfig.joint_sigma)),
                gaze_sigma=float(nd.get("gaze_sigma", NoiseConfig.gaze_sigma)),
                bbox_sigma=float(nd.get("bbox_sigma", NoiseConfig.bbox_sigma)),
                nonmetric_scale_range=tuple(
                    nd.get("nonmetric_scale_range", NoiseConfig.nonmetric_scale_range)
                ),
            )
        except Exception as exc:
            problems.append(f"noise: {exc}")

    pipeline_cfg = PipelineConfig()
    for key, value in doc.get("pipeline", {}).items():
        if not hasattr(pipeline_cfg, key):
            problems.append(f"pipeline: unknown option {key!r}")
        else:
            setattr(pipeline_cfg, key, value)

    expected = doc.get("expected_target")
    if expected is not None and expected not in {o.id for o in objects}:
        problems.append(f"expected_target {expected!r} not among object ids")

    step_budget = int(doc.get("step_budget", 10000))
    pipeline_cfg.step_budget = step_budget
    seed = int(doc.get("seed", 0))

    if grid is not None and robot is not None and not problems:
        try:
            WorldModel(grid, tuple(objects), tuple(instructors), robot, seed)
        except Exception as exc:
            problems.append(str(exc))

    if problems:
        raise ValidationError(problems)

    return ScenarioSpec(
        name=name,
        grid=grid,
        objects=tuple(objects),
        instructors=tuple(instructors),
        robot=robot,
        events=tuple(events),
        noise=noise,
        seed=seed,
        expected_target=expected,
        step_budget=step_budget,
        pipeline=pipeline_cfg,
    )


class EpisodeRunner:
    """Tick-level episode driver shared by `run` and the live service.

    Keeping the event-dispatch rule in one place guarantees that a scripted
    CLI run and a service session fed the same events produce byte-identical
    traces.
    """

    def __init__(self, spec: ScenarioSpec, seed_override: int | None = None):
        self.spec = spec
        self.seed = spec.seed if seed_override is None else seed_override
        world = spec.build_world()
        self.world = type(world)(
            world.grid, world.objects, world.instructors, world.robot, self.seed
        )
        self.pipe = Pipeline(spec.pipeline, spec.noise, RngStreams.from_seed(self.seed))
        self.queue = list(spec.events)
        self.pipe.records.append(
            {"t": 0.0, "header": True, "schema_version": SCHEMA_VERSION,
             "scenario": spec.name, "seed": self.seed}
        )
        self.report: RunReport | None = None

    @property
    def finished(self) -> bool:
        return self.report is not None

    def push_event(self, event: CommandEvent) -> None:
        self.queue.append(event)
        self.queue.sort(key=lambda e: e.sim_time)

    def tick(self) -> bool:
        """Advance one step; returns True once the episode has terminated."""
        if self.finished:
            return True
        pipe = self.pipe
        if not pipe.terminal and pipe.steps <= self.spec.step_budget:
            event = None
            if (
                self.queue
                and pipe.sim_time >= self.queue[0].sim_time - 1e-9
                and pipe.phase in (Phase.IDLE, Phase.AWAITING_COMMAND)
            ):
                event = self.queue.pop(0)
            self.world = pipe.step(self.world, event)
        if pipe.terminal or pipe.steps > self.spec.step_budget:
            self._finalize()
            return True
        return False

    def _finalize(self) -> None:
        pipe = self.pipe
        if not pipe.terminal:
            pipe.phase = Phase.FAILED
            pipe.reason = FailReason.STUCK
            pipe._record(self.world)
        self.report = _make_report(self.spec, self.seed, pipe, self.world)
        pipe.records.append(_terminal_record(pipe, self.report))


def run(spec: ScenarioSpec, seed_override: int | None = None):
    """Deterministic episode; returns (trace dict records, RunReport, world)."""
    runner = EpisodeRunner(spec, seed_override)
    while not runner.tick():
        pass
    return runner.pipe.records, runner.report, runner.world


def _make_report(spec: ScenarioSpec, seed: int, pipe: Pipeline, world) -> RunReport:
    dist = math.inf
    az_err = math.inf
    target = None
    if spec.expected_target:
        target = next(o for o in spec.objects if o.id == spec.expected_target)
        p = world.robot.pose
        cx, cy = target.centroid
        dist = math.hypot(cx - p.x, cy - p.y)
        if pipe.estimate is not None and pipe.instructor_anchor is not None:
            true_az = math.atan2(cy - pipe.instructor_anchor[1],
                                 cx - pipe.instructor_anchor[0])
            az_err = abs(wrap_angle(pipe.estimate.azimuth - true_az))
    in_view = False
    if target is not None and pipe.phase is Phase.DONE:
        from .world import render_object_boxes

        boxes = {oid: vf for oid, _, vf in render_object_boxes(world)}
        in_view = boxes.get(target.id, 0.0) >= spec.pipeline.out_of_view_fraction
    success = (
        pipe.phase is Phase.DONE
        and target is not None
        and dist <= SUCCESS_RADIUS
        and in_view
        and (pipe.chosen is not None and pipe.chosen.object_id == spec.expected_target)
    )
    return RunReport(
        scenario=spec.name,
        seed=seed,
        outcome=pipe.phase.value,
        reason=pipe.reason.value if pipe.reason else None,
        success=bool(success),
        final_distance=float(dist),
        azimuth_error=float(az_err),
        steps=pipe.steps,
        gaze_degraded=bool(pipe.gaze_degraded_flag),
    )


def _terminal_record(pipe: Pipeline, report: RunReport):
    rec = {
        "t": round(pipe.sim_time, 9),
        "terminal": True,
        "outcome": report.outcome,
        "metrics": {
            "final_distance": _finite(report.final_distance),
            "azimuth_error": _finite(report.azimuth_error),
            "steps": report.steps,
            "success": report.success,
            "gaze_degraded": report.gaze_degraded,
        },
    }
    if report.reason:
        rec["reason"] = report.reason
    if pipe.stop_reason:
        rec["stop_reason"] = pipe.stop_reason
    return rec


def _finite(x: float):
    return round(x, 6) if math.isfinite(x) else None


# ---------------------------------------------------------------------------
# Trace serialization


def dump_trace(records, path) -> None:
    Path(path).write_bytes(trace_bytes(records))


def trace_bytes(records) -> bytes:
    lines = [json.dumps(r, sort_keys=True, separators=(",", ":")) for r in records]
    return ("\n".join(lines) + "\n").encode()


def load_trace(path):
    records = []
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{i}: {exc}") from exc
    return records


def validate_trace(records) -> None:
    """Replay-side checks: nondecreasing timestamps, exactly one terminal."""
    times = [r["t"] for r in records]
    if any(b < a - 1e-12 for a, b in zip(times, times[1:])):
        raise ValidationError(["timestamps not nondecreasing"])
    terminals = [r for r in records if r.get("terminal")]
    if len(terminals) != 1 or not records[-1].get("terminal"):
        raise ValidationError(["trace must end with exactly one terminal record"])


# ---------------------------------------------------------------------------
# Batch


def batch(specs, seeds):
    """Run every (spec, seed) pair; returns per-spec aggregate rows."""
    if not specs or not seeds:
        raise ValueError("need at least one scenario and one seed")
    rows = []
    for spec in specs:
        reports = [run(spec, seed_override=s)[1] for s in seeds]
        n = len(reports)
        dists = [r.final_distance for r in reports if math.isfinite(r.final_distance)]
        azs = [r.azimuth_error for r in reports if math.isfinite(r.azimuth_error)]
        reasons = {}
        for r in reports:
            if r.reason:
                reasons[r.reason] = reasons.get(r.reason, 0) + 1
        rows.append(
            {
                "scenario": spec.name,
                "n": n,
                "success_rate": sum(r.success for r in reports) / n,
                "mean_distance": float(np.mean(dists)) if dists else None,
                "mean_azimuth_error": float(np.mean(azs)) if azs else None,
                "failures": reasons,
                "gaze_degraded_rate": sum(r.gaze_degraded for r in reports) / n,
            }
        )
    return rows
