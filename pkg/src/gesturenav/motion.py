"""Exact unicycle kinematics."""

from __future__ import annotations

import math

from .geometry import Pose2


def unicycle_step(pose: Pose2, v: float, w: float, dt: float) -> Pose2:
    """Integrate (v, w) over dt exactly: a circular arc when turning,
    a straight segment otherwise."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if abs(w) > 1e-9:
        r = v / w
        dtheta = w * dt
        x = pose.x + r * (math.sin(pose.theta + dtheta) - math.sin(pose.theta))
        y = pose.y - r * (math.cos(pose.theta + dtheta) - math.cos(pose.theta))
        return Pose2(x, y, pose.theta + dtheta)
    return Pose2(
        pose.x + v * dt * math.cos(pose.theta),
        pose.y + v * dt * math.sin(pose.theta),
        pose.theta,
    )
