"""Behaviour state machine driving one guidance episode.

Command intake -> pointing estimation -> intermediate goal -> navigation ->
grounding -> disambiguation -> final approach, with the referral loop that
re-runs the whole chain at a second instructor.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import errors as err
from .geometry import Pose2, Ray3, wrap_angle
from .grid import PathFollower, PlanPath, inflate, plan, raycast, SAFETY_MARGIN_CELLS
from .grounding import Phrase, ground, disambiguate, parse_phrase
from .pointing import estimate_depth, estimate_pointing, person_ground_position
from .world import (
    NoiseConfig,
    RngStreams,
    WorldModel,
    in_frame_fraction,
    object_fully_in_view,
    observe_person,
    render_object_boxes,
    render_view,
    step_robot,
)


class Phase(str, enum.Enum):
    IDLE = "Idle"
    AWAITING_COMMAND = "AwaitingCommand"
    ESTIMATING_POINTING = "EstimatingPointing"
    NAVIGATING_INTERMEDIATE = "NavigatingIntermediate"
    GROUNDING = "Grounding"
    APPROACHING_FINAL = "ApproachingFinal"
    SEEKING_REFERRED_PERSON = "SeekingReferredPerson"
    DONE = "Done"
    FAILED = "Failed"


class FailReason(str, enum.Enum):
    FOOT_NOT_VISIBLE = "FootNotVisible"
    NO_POINTING_ARM = "NoPointingArm"
    DEGENERATE_HORIZON = "DegenerateHorizon"
    GROUNDING_NOT_FOUND = "GroundingNotFound"
    NO_PATH = "NoPath"
    STUCK = "Stuck"
    NO_CANDIDATES = "NoCandidates"
    DEGENERATE_FUSION = "DegenerateFusion"


# Pointing/perception errors collapsed onto the fixed reason-code set.
_ERROR_REASONS = [
    (err.FootNotVisible, FailReason.FOOT_NOT_VISIBLE),
    (err.NotVisible, FailReason.FOOT_NOT_VISIBLE),
    (err.DegenerateHorizon, FailReason.DEGENERATE_HORIZON),
    (err.FootAboveHorizon, FailReason.DEGENERATE_HORIZON),
    (err.DegenerateSkeleton, FailReason.DEGENERATE_HORIZON),
    (err.NoPointingArm, FailReason.NO_POINTING_ARM),
    (err.DegenerateFusion, FailReason.DEGENERATE_FUSION),
    (err.VerticalRay, FailReason.DEGENERATE_FUSION),
    (err.NoCandidates, FailReason.NO_CANDIDATES),
    (err.NoFreePoseOnRay, FailReason.NO_PATH),
    (err.GoalOccupied, FailReason.NO_PATH),
    (err.NoPath, FailReason.NO_PATH),
    (err.Stuck, FailReason.STUCK),
]


def _reason_for(exc: Exception) -> FailReason:
    for cls, reason in _ERROR_REASONS:
        if isinstance(exc, cls):
            return reason
    raise exc


@dataclass(frozen=True)
class CommandEvent:
    instructor_id: str
    utterance: str
    sim_time: float = 0.0

    def __post_init__(self):
        if not self.utterance:
            raise ValueError("utterance must be nonempty")


@dataclass
class PipelineConfig:
    dt: float = 0.05
    v_max: float = 0.5
    w_max: float = 1.5
    fusion_w_body: float = 0.5
    fusion_w_gaze: float = 0.5
    grounding_threshold: float = 0.60
    intermediate_distance: float = 1.0  # meters from the instructor on the ray
    ray_probe_max: float = 2.0
    gaze_failure_range: float = 5.0
    out_of_view_fraction: float = 0.05
    approach_segment: float = 0.5
    reached_face_distance: float = 0.8
    engage_distance: float = 2.5
    step_budget: int = 10000
    referral_words: frozenset = frozenset({"ask", "person", "him", "her"})


REFERRAL_STOP_REASONS = ()
STOP_OBJECT_REACHED = "ObjectReached"
STOP_NO_NAVIGABLE = "NoNavigableSpace"
STOP_OUT_OF_VIEW = "OutOfView"


def intermediate_goal(instructor_xy, azimuth: float, grid, robot_radius: float = 0.25,
                      distance: float = 1.0, probe_max: float = 2.0) -> Pose2:
    """Pose on the map `distance` from the instructor along the pointing
    ray, heading along the ray; probes forward in half-cell steps when that
    spot is blocked.

    Raises NoFreePoseOnRay when nothing within `probe_max` is free.
    """
    inflated = inflate(grid, robot_radius + SAFETY_MARGIN_CELLS * grid.resolution)
    ix, iy = float(instructor_xy[0]), float(instructor_xy[1])
    if not grid.contains_point(ix, iy):
        raise err.OriginOutsideGrid("instructor outside grid")
    c, s = math.cos(azimuth), math.sin(azimuth)
    d = distance
    step = 0.5 * grid.resolution
    while d <= probe_max + 1e-9:
        x, y = ix + d * c, iy + d * s
        if inflated.is_free(x, y):
            return Pose2(x, y, azimuth)
        d += step
    raise err.NoFreePoseOnRay(
        f"no free pose within {probe_max} m along azimuth {azimuth:.3f}"
    )


@dataclass
class Pipeline:
    """One episode driver; `step` advances exactly one simulation tick."""

    config: PipelineConfig
    noise: NoiseConfig
    rng: RngStreams
    phase: Phase = Phase.IDLE
    reason: FailReason | None = None
    stop_reason: str | None = None
    sim_time: float = 0.0
    steps: int = 0
    active_instructor: str | None = None
    phrase: Phrase | None = None
    estimate: object = None
    instructor_anchor: np.ndarray | None = None
    goal: Pose2 | None = None
    path: PlanPath | None = None
    follower: PathFollower | None = None
    proposals: list = field(default_factory=list)
    chosen: object = None
    approach_target: str | None = None
    pointing_count: int = 0
    gaze_degraded_flag: bool = False
    records: list = field(default_factory=list)

    @property
    def terminal(self) -> bool:
        return self.phase in (Phase.DONE, Phase.FAILED)

    # -- trace helpers ------------------------------------------------------

    def _record(self, world: WorldModel, **extra):
        p = world.robot.pose
        rec = {
            "t": round(self.sim_time, 9),
            "state": self.phase.value,
            "pose": [float(p.x), float(p.y), float(p.theta)],
        }
        if self.reason is not None:
            rec["reason"] = self.reason.value
        rec.update(extra)
        self.records.append(rec)

    def _fail(self, world: WorldModel, reason: FailReason):
        self.phase = Phase.FAILED
        self.reason = reason
        self._record(world)

    # -- main transition ----------------------------------------------------

    def step(self, world: WorldModel, event: CommandEvent | None = None):
        """Advance one tick; returns the (possibly) updated world."""
        if self.terminal:
            return world
        self.steps += 1
        if self.steps > self.config.step_budget:
            self._fail(world, FailReason.STUCK)
            return world

        handler = {
            Phase.IDLE: self._step_idle,
            Phase.AWAITING_COMMAND: self._step_awaiting,
            Phase.ESTIMATING_POINTING: self._step_estimating,
            Phase.NAVIGATING_INTERMEDIATE: self._step_navigating,
            Phase.GROUNDING: self._step_grounding,
            Phase.SEEKING_REFERRED_PERSON: self._step_seeking,
            Phase.APPROACHING_FINAL: self._step_approaching,
        }[self.phase]
        world = handler(world, event)
        self.sim_time += self.config.dt
        return world

    def _step_idle(self, world, event):
        # Engagement (display / question) is reduced to this edge.
        self.phase = Phase.AWAITING_COMMAND
        self._record(world)
        return self._step_awaiting(world, event) if event else world

    def _step_awaiting(self, world, event):
        if event is None:
            self._record(world)
            return world
        self.active_instructor = event.instructor_id
        try:
            self.phrase = parse_phrase(event.utterance)
        except err.EmptyPhrase:
            self._fail(world, FailReason.GROUNDING_NOT_FOUND)
            return world
        self.phase = Phase.ESTIMATING_POINTING
        self._record(world, utterance=event.utterance)
        return world

    def _step_estimating(self, world, event):
        cfg = self.config
        self.pointing_count += 1
        try:
            skel, head, det = observe_person(
                world, self.active_instructor, self.noise, self.rng
            )
            depth = estimate_depth(
                det, world.robot.intrinsics, world.robot.camera_height
            )
            degraded = depth > cfg.gaze_failure_range
            self.gaze_degraded_flag = self.gaze_degraded_flag or degraded
            est = estimate_pointing(
                skel, head, det, world.robot,
                w_body=cfg.fusion_w_body, w_gaze=cfg.fusion_w_gaze,
                gaze_degraded=degraded,
            )
            self.estimate = est
            self.instructor_anchor = person_ground_position(det, world.robot, est.depth)
            grid = world.obstacle_grid()
            self.goal = intermediate_goal(
                self.instructor_anchor, est.azimuth, grid, world.robot.radius,
                cfg.intermediate_distance, cfg.ray_probe_max,
            )
            self.path = plan(grid, world.robot.pose, self.goal, world.robot.radius)
            self.follower = PathFollower(
                self.path, grid.resolution, v_max=cfg.v_max, w_max=cfg.w_max
            )
        except err.GestureNavError as exc:
            self._fail(world, _reason_for(exc))
            return world
        self.phase = Phase.NAVIGATING_INTERMEDIATE
        self._record(
            world,
            estimate=_estimate_dict(est, world),
            anchor=[float(self.instructor_anchor[0]), float(self.instructor_anchor[1])],
            goal=[self.goal.x, self.goal.y, self.goal.theta],
            path=_path_list(self.path),
            gaze_degraded=bool(degraded),
        )
        return world

    def _drive(self, world, on_arrival: Phase):
        cmd = self.follower.command(world.robot.pose, self.config.dt)
        if cmd is None:
            self.phase = on_arrival
            self._record(world)
            return world
        world, collided = step_robot(world, cmd[0], cmd[1], self.config.dt)
        if self.follower.update_progress(world.robot.pose, self.config.dt):
            self._fail(world, FailReason.STUCK)
            return world
        self._record(world)
        return world

    def _step_navigating(self, world, event):
        return self._drive(world, Phase.GROUNDING)

    def _step_grounding(self, world, event):
        cfg = self.config
        view = render_view(world)
        # The commanding instructor is not a grounding candidate.
        view = [e for e in view if e[0] != self.active_instructor]
        self.proposals = ground(view, self.phrase, cfg.grounding_threshold)
        if not self.proposals:
            self._fail(world, FailReason.GROUNDING_NOT_FOUND)
            return world
        ray = Ray3(
            np.array([self.instructor_anchor[0], self.instructor_anchor[1], 0.0]),
            np.array([math.cos(self.estimate.azimuth),
                      math.sin(self.estimate.azimuth), 0.0]),
        )
        centroids = {o.id: tuple(o.centroid) for o in world.objects}
        centroids.update({i.id: (i.base.x, i.base.y) for i in world.instructors})
        try:
            self.chosen = disambiguate(self.proposals, ray, centroids)
        except err.GestureNavError as exc:
            self._fail(world, _reason_for(exc))
            return world

        chosen_is_person = any(i.id == self.chosen.object_id for i in world.instructors)
        referral = bool(
            cfg.referral_words & set(self.phrase.raw.lower().split())
        ) or self.phrase.class_token == "person"
        rec_extra = {
            "proposals": [
                {"id": p.object_id, "score": round(p.score, 6)} for p in self.proposals
            ],
            "chosen": self.chosen.object_id,
        }
        if chosen_is_person and referral:
            try:
                self._plan_engagement(world, self.chosen.object_id)
            except err.GestureNavError as exc:
                self._fail(world, _reason_for(exc))
                return world
            self.phase = Phase.SEEKING_REFERRED_PERSON
            self._record(world, **rec_extra, referred=self.chosen.object_id)
            return world
        self.approach_target = self.chosen.object_id
        self.phase = Phase.APPROACHING_FINAL
        self.follower = None
        self._record(world, **rec_extra)
        return world

    def _plan_engagement(self, world, person_id):
        """Plan to a pose `engage_distance` from the referred person, facing
        them, approaching from the robot's current side."""
        cfg = self.config
        ins = world.instructor(person_id)
        grid = world.obstacle_grid()
        px, py = ins.base.x, ins.base.y
        rx, ry = world.robot.pose.x, world.robot.pose.y
        back = math.atan2(ry - py, rx - px)
        inflated = inflate(
            grid, world.robot.radius + SAFETY_MARGIN_CELLS * grid.resolution
        )
        for dtheta in (0.0, 0.3, -0.3, 0.6, -0.6, 1.0, -1.0, 1.5, -1.5):
            for dist in (cfg.engage_distance, cfg.engage_distance * 0.8,
                         cfg.engage_distance * 1.2):
                ang = back + dtheta
                x, y = px + dist * math.cos(ang), py + dist * math.sin(ang)
                if not inflated.is_free(x, y):
                    continue
                goal = Pose2(x, y, wrap_angle(ang + math.pi))
                try:
                    self.path = plan(grid, world.robot.pose, goal, world.robot.radius)
                except err.GestureNavError:
                    continue
                self.follower = PathFollower(
                    self.path, grid.resolution, v_max=cfg.v_max, w_max=cfg.w_max
                )
                self.goal = goal
                return
        raise err.NoPath(f"no engagement pose near {person_id}")

    def _step_seeking(self, world, event):
        world = self._drive(world, Phase.AWAITING_COMMAND)
        if self.phase is Phase.AWAITING_COMMAND:
            # Second pipeline invocation begins at the referred person.
            self.active_instructor = None
            self.phrase = None
            self.follower = None
            self.path = None
        return world

    def _step_approaching(self, world, event):
        cfg = self.config
        obj = next(o for o in world.objects if o.id == self.approach_target)
        pose = world.robot.pose
        cx, cy = obj.centroid
        bearing = math.atan2(cy - pose.y, cx - pose.x)
        grid = world.obstacle_grid()

        boxes = {oid: (bbox, vf) for oid, bbox, vf in render_object_boxes(world)}
        entry = boxes.get(obj.id)
        # Frame fraction, not occlusion-aware: an object hidden behind a
        # wall has not left the view, it is just not reachable yet.
        frame_frac = in_frame_fraction(world, obj)

        rng_dist, hit = raycast(grid, (pose.x, pose.y), bearing, 10.0)
        hit_in_obj = False
        if hit:
            hx = pose.x + rng_dist * math.cos(bearing)
            hy = pose.y + rng_dist * math.sin(bearing)
            xmin, ymin, xmax, ymax = obj.footprint
            g = grid.resolution
            hit_in_obj = (xmin - g <= hx <= xmax + g) and (ymin - g <= hy <= ymax + g)

        if (
            entry is not None
            and object_fully_in_view(world, obj)
            and hit_in_obj
            and rng_dist < cfg.reached_face_distance
        ):
            return self._stop(world, STOP_OBJECT_REACHED)
        if hit and rng_dist < world.robot.radius + grid.resolution:
            return self._stop(world, STOP_NO_NAVIGABLE)
        if frame_frac < cfg.out_of_view_fraction:
            return self._stop(world, STOP_OUT_OF_VIEW)

        if self.follower is None or self.follower.done:
            seg = cfg.approach_segment
            planned = False
            # Segments shorter than the waypoint tolerance cannot advance
            # the robot; treat that as exhausted navigable space.
            seg_min = max(0.05, 0.6 * grid.resolution)
            while seg >= seg_min and not planned:
                gx = pose.x + seg * math.cos(bearing)
                gy = pose.y + seg * math.sin(bearing)
                try:
                    self.path = plan(
                        grid, pose, Pose2(gx, gy, bearing), world.robot.radius
                    )
                    planned = True
                except err.GestureNavError:
                    seg *= 0.5
            if not planned:
                return self._stop(world, STOP_NO_NAVIGABLE)
            self.follower = PathFollower(
                self.path, grid.resolution, v_max=cfg.v_max, w_max=cfg.w_max
            )
        cmd = self.follower.command(pose, cfg.dt)
        if cmd is None:
            self._record(world)
            return world
        world, collided = step_robot(world, cmd[0], cmd[1], cfg.dt)
        if self.follower.update_progress(world.robot.pose, cfg.dt):
            self._fail(world, FailReason.STUCK)
            return world
        self._record(world)
        return world

    def _stop(self, world, stop_reason: str):
        self.stop_reason = stop_reason
        self.phase = Phase.DONE
        self._record(world, stop_reason=stop_reason)
        return world


def _estimate_dict(est, world):
    from .geometry import ground_project

    T = world.camera_transform()

    def _map_azimuth(ray):
        if ray is None:
            return None
        try:
            return round(ground_project(
                type(ray)(np.zeros(3), T.apply_direction(ray.direction))
            ), 9)
        except err.VerticalRay:
            return None

    return {
        "depth": round(float(est.depth), 9),
        "azimuth": round(float(est.azimuth), 9),
        "body_azimuth": _map_azimuth(est.body_ray),
        "gaze_azimuth": _map_azimuth(est.gaze_ray),
        "disagreement": round(float(est.disagreement), 9),
        "gaze_degraded": bool(est.gaze_degraded),
    }


def _path_list(path: PlanPath):
    return [[p.x, p.y, p.theta] for p in path.waypoints]


def final_approach(world: WorldModel, chosen, azimuth: float,
                   config: PipelineConfig | None = None):
    """Standalone final-approach rollout toward a chosen proposal.

    Returns (trajectory poses, stop_reason, final world). Provided for
    direct testing of the stopping rules; the episode pipeline embeds the
    same logic in its ApproachingFinal phase.
    """
    cfg = config or PipelineConfig()
    pipe = Pipeline(cfg, NoiseConfig.zero(), RngStreams.from_seed(world.seed))
    pipe.phase = Phase.APPROACHING_FINAL
    pipe.approach_target = chosen.object_id
    pipe.chosen = chosen
    trajectory = [world.robot.pose]
    for _ in range(cfg.step_budget):
        world = pipe.step(world)
        trajectory.append(world.robot.pose)
        if pipe.terminal:
            break
    return trajectory, pipe.stop_reason, world
