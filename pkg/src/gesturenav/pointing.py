"""Pointing-direction estimation from simulated monocular observations.

Covers geometric depth from the foot-contact pixel, non-metric scale
recovery, body-frame construction, skeleton and gaze pointing rays,
fusion, and the transform into the map frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateFusion,
    DegenerateHorizon,
    DegenerateSkeleton,
    FootAboveHorizon,
    FootNotVisible,
    NoPointingArm,
)
from .geometry import (
    CameraIntrinsics,
    Ray3,
    angle_between,
    bearing_of_pixel,
    camera_to_map,
    ground_project,
)
from .world import PersonDetection, RobotState, SkeletonObservation

# Minimum elevation of the wrist-shoulder vector above the hanging-arm rest
# direction for an arm to count as pointing.
ARM_ELEVATION_GATE = math.radians(15.0)

# Above this body/gaze disagreement the gaze ray wins outright.
DISAGREEMENT_CUTOFF = math.radians(45.0)


@dataclass(frozen=True)
class BodyFrame:
    """Instructor-centric frame: origin at the pelvis, x toward the left
    hip, y along the spine (orthogonalized), z = x cross y."""

    origin: np.ndarray
    x_axis: np.ndarray
    y_axis: np.ndarray
    z_axis: np.ndarray

    @staticmethod
    def from_skeleton(skel: SkeletonObservation) -> "BodyFrame":
        pelvis = skel.joints["pelvis"]
        x = skel.joints["l_hip"] - pelvis
        nx = np.linalg.norm(x)
        if nx < 1e-9:
            raise DegenerateSkeleton("left hip coincides with pelvis")
        x = x / nx
        y = skel.joints["spine"] - pelvis
        y = y - np.dot(y, x) * x
        ny = np.linalg.norm(y)
        if ny < 1e-9:
            raise DegenerateSkeleton("spine colinear with the hip axis")
        y = y / ny
        return BodyFrame(pelvis, x, y, np.cross(x, y))


@dataclass(frozen=True)
class PointingEstimate:
    """Fused pointing estimate in the map frame with its components."""

    body_ray: Ray3       # camera frame
    gaze_ray: Ray3       # camera frame
    fused_ray_map: Ray3  # map frame
    depth: float         # meters, Eq.-style optical-axis range to the person
    azimuth: float       # radians, map frame
    disagreement: float  # radians, angle(body, gaze)
    gaze_degraded: bool = False


def estimate_depth(det: PersonDetection, k: CameraIntrinsics, camera_height: float) -> float:
    """Distance to the person from the foot-contact pixel: d = f_y*H_c/|b_y - c_y|.

    Requires the foot-floor contact point in the image and a bounding-box
    bottom below the principal row (a person standing on the shared floor).
    """
    if not det.foot_visible:
        raise FootNotVisible("foot-floor contact point outside the image")
    _, b_y = det.bottom_center
    if b_y < k.c_y:
        raise FootAboveHorizon(f"box bottom {b_y} above principal row {k.c_y}")
    dy = abs(b_y - k.c_y)
    if dy < 1.0:
        raise DegenerateHorizon("box bottom within 1 px of the principal row")
    return k.f_y * camera_height / dy


def recover_scale(skel: SkeletonObservation, depth: float) -> SkeletonObservation:
    """Rescale a non-metric skeleton to meters using the pelvis camera-depth
    as the range proxy (zero-pitch mount)."""
    pz = float(skel.joints["pelvis"][2])
    if pz <= 1e-6:
        raise DegenerateSkeleton("pelvis has no usable depth")
    if depth <= 0:
        raise ValueError("depth must be positive")
    return skel.scaled(depth / pz)


def body_pointing_ray(skel: SkeletonObservation) -> Ray3:
    """Shoulder-to-wrist ray of the pointing arm.

    The pointing arm is the one whose wrist is farther from the pelvis,
    provided its wrist-shoulder direction is raised at least 15 degrees
    from the hanging rest direction (+y in the camera frame).
    """
    pelvis = skel.joints["pelvis"]
    down = np.array([0.0, 1.0, 0.0])
    candidates = []
    for side in ("l", "r"):
        shoulder = skel.joints[f"{side}_shoulder"]
        wrist = skel.joints[f"{side}_wrist"]
        arm = wrist - shoulder
        if np.linalg.norm(arm) < 1e-9:
            continue
        if angle_between(arm, down) < ARM_ELEVATION_GATE:
            continue
        candidates.append((float(np.linalg.norm(wrist - pelvis)), shoulder, arm))
    if not candidates:
        raise NoPointingArm("neither arm passes the elevation gate")
    _, shoulder, arm = max(candidates, key=lambda c: c[0])
    return Ray3(shoulder, arm / np.linalg.norm(arm))


def fuse_directions(body: Ray3, gaze: Ray3, w_body: float = 0.5, w_gaze: float = 0.5):
    """Normalized weighted average of the two unit directions.

    Returns (fused unit direction, disagreement angle). When the rays
    disagree by more than 45 degrees the gaze direction wins outright.
    """
    if abs(w_body + w_gaze - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")
    disagreement = angle_between(body.direction, gaze.direction)
    mix = w_body * body.direction + w_gaze * gaze.direction
    n = float(np.linalg.norm(mix))
    if n < 1e-6:
        raise DegenerateFusion("antiparallel directions with equal weights")
    if disagreement > DISAGREEMENT_CUTOFF:
        return gaze.direction.copy(), disagreement
    return mix / n, disagreement


def to_map_frame(dir_cam, origin_cam, robot: RobotState) -> tuple[Ray3, float]:
    """Express a camera-frame ray in the map frame and take its azimuth."""
    T = camera_to_map(robot.pose, robot.camera_height)
    ray = Ray3(T.apply(origin_cam), T.apply_direction(dir_cam))
    return ray, ground_project(ray)


def estimate_pointing(skel: SkeletonObservation, head_pose, det: PersonDetection,
                      robot: RobotState, w_body: float = 0.5, w_gaze: float = 0.5,
                      gaze_degraded: bool = False) -> PointingEstimate:
    """Full estimation chain from one observation triple.

    With `gaze_degraded` (instructor too far for face-pose estimation) the
    body ray is used alone, matching the real system's failure mode.
    """
    depth = estimate_depth(det, robot.intrinsics, robot.camera_height)
    metric = recover_scale(skel, depth)
    body = body_pointing_ray(metric)
    gaze = Ray3(metric.joints["head"], head_pose.gaze_dir)
    if gaze_degraded:
        fused = body.direction.copy()
        disagreement = angle_between(body.direction, gaze.direction)
    else:
        fused, disagreement = fuse_directions(body, gaze, w_body, w_gaze)
    ray_map, azimuth = to_map_frame(fused, body.origin, robot)
    return PointingEstimate(
        body_ray=body,
        gaze_ray=gaze,
        fused_ray_map=ray_map,
        depth=depth,
        azimuth=azimuth,
        disagreement=disagreement,
        gaze_degraded=gaze_degraded,
    )


def person_ground_position(det: PersonDetection, robot: RobotState, depth: float):
    """Map-frame floor position of the person from the detection box bottom
    center and the estimated depth."""
    b_x, b_y = det.bottom_center
    k = robot.intrinsics
    u = min(max(b_x, 0.0), k.width - 1e-6)
    v = min(max(b_y, 0.0), k.height - 1e-6)
    bearing = bearing_of_pixel((u, v), k)
    p_cam = bearing.direction / bearing.direction[2] * depth
    p_map = camera_to_map(robot.pose, robot.camera_height).apply(p_cam)
    return np.array([p_map[0], p_map[1]])
