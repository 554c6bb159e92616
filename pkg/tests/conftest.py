import math
from pathlib import Path

import numpy as np
import pytest

from gesturenav.geometry import CameraIntrinsics, Pose2
from gesturenav.grid import OccupancyGrid, FREE, OCCUPIED
from gesturenav.world import InstructorModel, RobotState, SimObject, WorldModel

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session")
def scenario_dir() -> Path:
    return SCENARIO_DIR


def empty_grid(width_m=10.0, height_m=8.0, resolution=0.05, border=True):
    """Free rectangular room, optionally with occupied border walls."""
    nx, ny = int(round(width_m / resolution)), int(round(height_m / resolution))
    cells = np.full((ny, nx), FREE, dtype=np.uint8)
    if border:
        cells[0, :] = OCCUPIED
        cells[-1, :] = OCCUPIED
        cells[:, 0] = OCCUPIED
        cells[:, -1] = OCCUPIED
    return OccupancyGrid(resolution, Pose2(0, 0, 0), cells)


def low_camera_robot(x=2.0, y=2.0, theta=0.0):
    """Robot with the camera geometry used by the shipped scenarios: low
    mount and principal point high in the image so nearby floor is visible."""
    return RobotState(
        pose=Pose2(x, y, theta),
        camera_height=0.7,
        intrinsics=CameraIntrinsics(300.0, 300.0, 320.0, 180.0, 640, 480),
        radius=0.25,
    )


def chair(oid, cx, cy, color, size=0.3, height=0.9):
    h = size / 2
    return SimObject(oid, "chair", frozenset([color]),
                     (cx - h, cy - h, cx + h, cy + h), height)


def simple_world(point_target=(7.0, 5.5, 0.8), instructor_pose=(5.5, 2.0, math.pi),
                 robot=None, objects=(), grid=None):
    ix, iy, itheta = instructor_pose
    ins = InstructorModel(
        id="guide", base=Pose2(ix, iy, itheta),
        point_target=point_target, gaze_target=point_target,
    )
    return WorldModel(
        grid=grid if grid is not None else empty_grid(),
        objects=tuple(objects),
        instructors=(ins,),
        robot=robot if robot is not None else low_camera_robot(),
        seed=0,
    )
