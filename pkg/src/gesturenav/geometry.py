"""Rigid-body transforms, pinhole camera model and ray types.

Conventions used everywhere in the package:

* Map frame: x east, y north, z up. Robot poses live on the z=0 plane.
* Camera frame: x right, y down, z forward (standard computer vision).
* The camera is mounted on the robot base with zero pitch and zero roll at
  a configurable height above the floor, looking along the robot heading.
* Angles are radians; degrees appear only at the CLI/UI boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera, OutOfImage, VerticalRay

_EPS = 1e-9


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    t = math.fmod(theta, 2.0 * math.pi)
    if t <= -math.pi:
        t += 2.0 * math.pi
    elif t > math.pi:
        t -= 2.0 * math.pi
    return t


@dataclass(frozen=True)
class Pose2:
    """Planar pose (meters, radians); theta is normalized on construction."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def compose(self, other: "Pose2") -> "Pose2":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(-c * self.x - s * self.y, s * self.x - c * self.y, -self.theta)


@dataclass(frozen=True, eq=False)
class Transform3:
    """Rigid transform: rotation (3x3 orthonormal, det +1) plus translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
            raise ValueError("rotation is not orthonormal")
        if not math.isclose(float(np.linalg.det(R)), 1.0, abs_tol=1e-9):
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Transform3":
        return Transform3(np.eye(3), np.zeros(3))

    def apply(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return self.rotation @ p + self.translation

    def apply_direction(self, d) -> np.ndarray:
        return self.rotation @ np.asarray(d, dtype=float)

    def inverse(self) -> "Transform3":
        return Transform3(self.rotation.T, -self.rotation.T @ self.translation)


def compose(a: Transform3, b: Transform3) -> Transform3:
    """Transform applying b first, then a."""
    return Transform3(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def rot_z(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics K = (f_x, f_y, c_x, c_y) plus image size, in pixels."""

    f_x: float
    f_y: float
    c_x: float
    c_y: float
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.f_x <= 0 or self.f_y <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.c_x < self.width and 0 <= self.c_y < self.height):
            raise ValueError("principal point outside the image")


@dataclass(frozen=True, eq=False)
class Ray3:
    """Half-line with unit direction; frame is contextual (camera or map)."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float).reshape(3)
        d = np.asarray(self.direction, dtype=float).reshape(3)
        n = float(np.linalg.norm(d))
        if abs(n - 1.0) > 1e-9:
            if n < _EPS:
                raise ValueError("ray direction has zero norm")
            d = d / n
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


def project(p_cam, k: CameraIntrinsics) -> tuple[float, float]:
    """Pinhole projection of a camera-frame point to pixel (u, v).

    Raises BehindCamera for z <= 0.
    """
    x, y, z = (float(v) for v in np.asarray(p_cam, dtype=float).reshape(3))
    if z <= 0.0:
        raise BehindCamera(f"point at z={z} is behind the camera")
    return k.f_x * x / z + k.c_x, k.f_y * y / z + k.c_y


def bearing_of_pixel(px, k: CameraIntrinsics) -> Ray3:
    """Unit camera-frame ray through a pixel (inverse pinhole)."""
    u, v = float(px[0]), float(px[1])
    if not (0.0 <= u < k.width and 0.0 <= v < k.height):
        raise OutOfImage(f"pixel ({u}, {v}) outside {k.width}x{k.height} image")
    d = np.array([(u - k.c_x) / k.f_x, (v - k.c_y) / k.f_y, 1.0])
    return Ray3(np.zeros(3), d / np.linalg.norm(d))


def ground_project(ray: Ray3) -> float:
    """Azimuth of a map-frame ray's horizontal component.

    Raises VerticalRay when the ray points (almost) straight up or down.
    """
    dx, dy = float(ray.direction[0]), float(ray.direction[1])
    if math.hypot(dx, dy) < 1e-6:
        raise VerticalRay("ray has no horizontal component")
    return math.atan2(dy, dx)


def camera_to_map(robot_pose: Pose2, camera_height: float) -> Transform3:
    """Transform taking camera-frame coordinates to the map frame.

    The camera sits at the robot position, `camera_height` above the floor,
    with zero pitch/roll: camera z is the robot heading, camera x the robot's
    right-hand side, camera y straight down.
    """
    c, s = math.cos(robot_pose.theta), math.sin(robot_pose.theta)
    right = np.array([s, -c, 0.0])
    down = np.array([0.0, 0.0, -1.0])
    forward = np.array([c, s, 0.0])
    R = np.column_stack([right, down, forward])
    t = np.array([robot_pose.x, robot_pose.y, camera_height])
    return Transform3(R, t)


def angle_between(a, b) -> float:
    """Angle in [0, pi] between two vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < _EPS or nb < _EPS:
        raise ValueError("zero-length vector")
    cosang = float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))
    return math.acos(cosang)
