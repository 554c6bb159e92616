"""Ground-truth world model and simulated perception front-ends.

The perception stack stands in for the neural pose / gaze / detection
networks of the real system: observations are derived from ground truth
and perturbed with calibrated noise, so the downstream estimation problem
stays intact.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotVisible, UnknownInstructor
from .geometry import CameraIntrinsics, Pose2, camera_to_map, project
from .grid import FREE, OccupancyGrid, raycast
from .motion import unicycle_step

JOINT_NAMES = (
    "pelvis", "spine", "head",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_hip", "r_hip",
    "l_ankle", "r_ankle",
)

# Detection boxes are padded by this fraction of the joint extent per side,
# modelling that a detector box covers the whole silhouette, not just joints.
BBOX_PAD = 0.05

_REFERENCE_STATURE = 1.7
_ARM_LENGTH = 0.55
_PELVIS_HEIGHT = 0.95

# Rest-pose joint offsets in the body frame (x left, y up, z forward),
# for a 1.70 m person; scaled linearly with stature.
_TEMPLATE = {
    "pelvis": (0.00, 0.00, 0.00),
    "spine": (0.00, 0.25, 0.00),
    "head": (0.00, 0.68, 0.02),
    "l_shoulder": (0.18, 0.55, 0.00),
    "l_elbow": (0.21, 0.27, 0.00),
    "l_wrist": (0.22, 0.02, 0.00),
    "r_shoulder": (-0.18, 0.55, 0.00),
    "r_elbow": (-0.21, 0.27, 0.00),
    "r_wrist": (-0.22, 0.02, 0.00),
    "l_hip": (0.10, -0.02, 0.00),
    "r_hip": (-0.10, -0.02, 0.00),
    "l_ankle": (0.10, -_PELVIS_HEIGHT, 0.00),
    "r_ankle": (-0.10, -_PELVIS_HEIGHT, 0.00),
}


def default_joint_template(stature: float = _REFERENCE_STATURE):
    s = stature / _REFERENCE_STATURE
    return {name: tuple(s * v for v in off) for name, off in _TEMPLATE.items()}


@dataclass(frozen=True)
class NoiseConfig:
    """Perception noise model; all noise disabled gives exact observations."""

    joint_sigma: float = 0.0266  # calibrated to the 35-50 mm mean-error band
    gaze_sigma: float = math.radians(3.0)
    bbox_sigma: float = 2.0
    nonmetric_scale_range: tuple[float, float] = (0.5, 2.0)

    def __post_init__(self):
        lo, hi = self.nonmetric_scale_range
        if self.joint_sigma < 0 or self.gaze_sigma < 0 or self.bbox_sigma < 0:
            raise ValueError("sigmas must be non-negative")
        if not (0 < lo <= hi):
            raise ValueError("invalid non-metric scale range")

    @staticmethod
    def zero():
        return NoiseConfig(0.0, 0.0, 0.0, (1.0, 1.0))


@dataclass
class RngStreams:
    """Independent per-subsystem RNG streams split from one seed, so that
    enabling one noise source never shifts another's draws."""

    skeleton: np.random.Generator
    gaze: np.random.Generator
    bbox: np.random.Generator

    @staticmethod
    def from_seed(seed: int) -> "RngStreams":
        kids = np.random.SeedSequence(seed).spawn(3)
        return RngStreams(*(np.random.default_rng(k) for k in kids))


@dataclass(frozen=True)
class SimObject:
    """Annotated static object on the map."""

    id: str
    class_label: str
    attributes: frozenset
    footprint: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    height: float

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.footprint
        if not (xmax > xmin and ymax > ymin):
            raise ValueError(f"object {self.id}: footprint has no area")
        if self.height <= 0:
            raise ValueError(f"object {self.id}: height must be positive")
        object.__setattr__(self, "attributes", frozenset(self.attributes))

    @property
    def centroid(self) -> np.ndarray:
        xmin, ymin, xmax, ymax = self.footprint
        return np.array([(xmin + xmax) / 2.0, (ymin + ymax) / 2.0])


@dataclass(frozen=True, eq=False)
class InstructorModel:
    """Human instructor: base pose on the floor plus a posable skeleton."""

    id: str
    base: Pose2
    stature: float = 1.7
    joint_template: dict = None
    point_target: tuple | None = None
    gaze_target: tuple | None = None

    def __post_init__(self):
        if not (1.0 <= self.stature <= 2.2):
            raise ValueError("stature out of [1.0, 2.2] m")
        tmpl = self.joint_template or default_joint_template(self.stature)
        missing = set(JOINT_NAMES) - set(tmpl)
        if missing:
            raise ValueError(f"joint template missing {sorted(missing)}")
        object.__setattr__(self, "joint_template", dict(tmpl))

    @property
    def pelvis_height(self) -> float:
        return -self.joint_template["l_ankle"][1]

    def body_to_map_rotation(self) -> np.ndarray:
        c, s = math.cos(self.base.theta), math.sin(self.base.theta)
        left = np.array([-s, c, 0.0])
        up = np.array([0.0, 0.0, 1.0])
        forward = np.array([c, s, 0.0])
        return np.column_stack([left, up, forward])

    def map_joints(self) -> dict:
        """Ground-truth joint positions in the map frame, with the pointing
        arm posed toward point_target when one is set."""
        tmpl = dict(self.joint_template)
        R = self.body_to_map_rotation()
        origin = np.array([self.base.x, self.base.y, self.pelvis_height])
        joints = {n: origin + R @ np.asarray(tmpl[n], float) for n in JOINT_NAMES}
        if self.point_target is not None:
            target = np.asarray(self.point_target, float)
            # Point with the arm on the target's side of the body.
            local = R.T @ (target - origin)
            side = "l" if local[0] >= 0 else "r"
            shoulder = joints[f"{side}_shoulder"]
            aim = target - shoulder
            n = np.linalg.norm(aim)
            if n > 1e-9:
                aim = aim / n
                arm = _ARM_LENGTH * self.stature / _REFERENCE_STATURE
                joints[f"{side}_wrist"] = shoulder + arm * aim
                joints[f"{side}_elbow"] = shoulder + 0.55 * arm * aim
        return joints

    def ground_position(self) -> np.ndarray:
        return np.array([self.base.x, self.base.y])


@dataclass(frozen=True)
class RobotState:
    pose: Pose2
    camera_height: float = 1.2
    intrinsics: CameraIntrinsics = field(
        default_factory=lambda: CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)
    )
    fov_check_margin: float = 0.0
    radius: float = 0.25

    def __post_init__(self):
        if self.camera_height <= 0:
            raise ValueError("camera height must be positive")


@dataclass(frozen=True, eq=False)
class SkeletonObservation:
    """13 named camera-frame joints; units are non-metric until scale
    recovery multiplies them back to meters."""

    joints: dict

    def __post_init__(self):
        js = {n: np.asarray(v, float).reshape(3) for n, v in self.joints.items()}
        missing = set(JOINT_NAMES) - set(js)
        if missing:
            raise ValueError(f"skeleton missing joints {sorted(missing)}")
        if js["pelvis"][2] <= 0:
            raise ValueError("pelvis behind the camera")
        object.__setattr__(self, "joints", js)

    def scaled(self, s: float) -> "SkeletonObservation":
        return SkeletonObservation({n: s * v for n, v in self.joints.items()})


@dataclass(frozen=True, eq=False)
class HeadPoseObservation:
    gaze_dir: np.ndarray  # unit vector, camera frame

    def __post_init__(self):
        d = np.asarray(self.gaze_dir, float).reshape(3)
        n = float(np.linalg.norm(d))
        if abs(n - 1.0) > 1e-9:
            raise ValueError("gaze direction must be unit norm")
        object.__setattr__(self, "gaze_dir", d)


@dataclass(frozen=True)
class PersonDetection:
    bbox: tuple[float, float, float, float]  # x_min, y_min, x_max, y_max
    foot_visible: bool

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if not (x0 < x1 and y0 < y1):
            raise ValueError("degenerate detection box")

    @property
    def bottom_center(self) -> tuple[float, float]:
        x0, _, x1, y1 = self.bbox
        return (x0 + x1) / 2.0, y1


@dataclass(frozen=True, eq=False)
class WorldModel:
    """Single source of ground truth; an immutable snapshot."""

    grid: OccupancyGrid
    objects: tuple
    instructors: tuple
    robot: RobotState
    seed: int = 0
    # Composite-grid cache, shared across snapshots via dataclasses.replace;
    # safe because grid and objects never change within an episode.
    _grid_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        ids = [o.id for o in self.objects]
        if len(ids) != len(set(ids)):
            raise ValueError("object ids must be unique")
        for obj in self.objects:
            xmin, ymin, xmax, ymax = obj.footprint
            for x, y in ((xmin, ymin), (xmax, ymax)):
                if not self.grid.contains_point(x, y):
                    raise ValueError(f"object {obj.id} outside grid bounds")
        if not self.grid.contains_point(self.robot.pose.x, self.robot.pose.y):
            raise ValueError("robot outside grid bounds")

    def instructor(self, instructor_id: str) -> InstructorModel:
        for ins in self.instructors:
            if ins.id == instructor_id:
                return ins
        raise UnknownInstructor(instructor_id)

    def obstacle_grid(self, exclude_object: str | None = None) -> OccupancyGrid:
        """Static grid with object footprints rasterized in; `exclude_object`
        leaves one object out (used for its own occlusion raycasts)."""
        if exclude_object not in self._grid_cache:
            boxes = [o.footprint for o in self.objects if o.id != exclude_object]
            self._grid_cache[exclude_object] = self.grid.with_boxes(boxes)
        return self._grid_cache[exclude_object]

    def camera_transform(self):
        return camera_to_map(self.robot.pose, self.robot.camera_height)


# ---------------------------------------------------------------------------
# Perception


def _project_many(points_cam, k: CameraIntrinsics):
    """Project camera-frame points with z > eps; returns list of (u, v)."""
    out = []
    for p in points_cam:
        if p[2] > 1e-9:
            out.append(project(p, k))
    return out


def _occluded(world: WorldModel, target_xy, exclude_object=None) -> bool:
    """2D grid raycast from the camera to a map point."""
    grid = world.obstacle_grid(exclude_object)
    cam = world.robot.pose
    dx, dy = target_xy[0] - cam.x, target_xy[1] - cam.y
    dist = math.hypot(dx, dy)
    if dist < 1e-9:
        return False
    rng_hit, hit = raycast(grid, (cam.x, cam.y), math.atan2(dy, dx), dist)
    return hit and rng_hit < dist - 1e-9


def observe_person(world: WorldModel, instructor_id: str, noise: NoiseConfig,
                   draw: RngStreams):
    """Simulated monocular observation of one instructor.

    Returns (SkeletonObservation, HeadPoseObservation, PersonDetection).
    The skeleton is perturbed per joint, then multiplied by a single
    non-metric scale; the gaze is the true target direction with angular
    noise; the detection box is the padded projected joint extent.

    Raises NotVisible when the instructor is out of frustum or occluded.
    """
    ins = world.instructor(instructor_id)
    k = world.robot.intrinsics
    T_cam_map = world.camera_transform().inverse()
    joints_map = ins.map_joints()
    joints_cam = {n: T_cam_map.apply(p) for n, p in joints_map.items()}

    pelvis = joints_cam["pelvis"]
    if pelvis[2] <= 0:
        raise NotVisible("instructor behind the camera")
    u, v = project(pelvis, k)
    m = world.robot.fov_check_margin
    if not (-m <= u < k.width + m and -m <= v < k.height + m):
        raise NotVisible("instructor outside the camera frustum")
    if _occluded(world, (ins.base.x, ins.base.y)):
        raise NotVisible("instructor occluded by the map")

    # Skeleton: per-joint Gaussian noise, then one global non-metric scale.
    noisy = {}
    for name in JOINT_NAMES:
        p = joints_cam[name]
        if noise.joint_sigma > 0:
            p = p + draw.skeleton.normal(0.0, noise.joint_sigma, 3)
        noisy[name] = p
    lo, hi = noise.nonmetric_scale_range
    s = float(draw.skeleton.uniform(lo, hi)) if hi > lo else float(lo)
    skeleton = SkeletonObservation({n: s * p for n, p in noisy.items()})

    # Gaze: true direction toward the gaze target, rotated by angular noise.
    if ins.gaze_target is not None:
        gdir_map = np.asarray(ins.gaze_target, float) - joints_map["head"]
    else:
        gdir_map = ins.body_to_map_rotation()[:, 2]  # facing direction
    gdir = T_cam_map.apply_direction(gdir_map)
    gdir = gdir / np.linalg.norm(gdir)
    if noise.gaze_sigma > 0:
        gdir = _perturb_direction(gdir, noise.gaze_sigma, draw.gaze)
    head_pose = HeadPoseObservation(gdir)

    # Detection: padded projected joint extent with corner noise.
    pix = _project_many(joints_cam.values(), k)
    us = np.array([p[0] for p in pix])
    vs = np.array([p[1] for p in pix])
    x0, x1 = float(us.min()), float(us.max())
    y0, y1 = float(vs.min()), float(vs.max())
    pad_x, pad_y = BBOX_PAD * (x1 - x0), BBOX_PAD * (y1 - y0)
    box = np.array([x0 - pad_x, y0 - pad_y, x1 + pad_x, y1 + pad_y])
    if noise.bbox_sigma > 0:
        box = box + draw.bbox.normal(0.0, noise.bbox_sigma, 4)
    ankle_v = max(project(joints_cam["l_ankle"], k)[1],
                  project(joints_cam["r_ankle"], k)[1])
    foot_visible = ankle_v < k.height
    detection = PersonDetection(tuple(float(b) for b in box), foot_visible)
    return skeleton, head_pose, detection


def _perturb_direction(d: np.ndarray, sigma: float, rng: np.random.Generator):
    """Tangential Gaussian perturbation with per-axis std `sigma` radians."""
    a = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(d, a)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(d, t1)
    e1, e2 = rng.normal(0.0, sigma, 2)
    out = d + e1 * t1 + e2 * t2
    return out / np.linalg.norm(out)


def _box_corners(footprint, height):
    xmin, ymin, xmax, ymax = footprint
    return [
        np.array([x, y, z])
        for x in (xmin, xmax)
        for y in (ymin, ymax)
        for z in (0.0, height)
    ]


_BOX_EDGES = [
    (0, 1), (2, 3), (4, 5), (6, 7),          # vertical
    (0, 2), (1, 3), (4, 6), (5, 7),          # along y
    (0, 4), (1, 5), (2, 6), (3, 7),          # along x
]


def _projected_bbox(corners_cam, k: CameraIntrinsics):
    """Image-space bbox of a 3D box, clipping edges at the z > 0 plane.

    Returns None when the box is entirely behind the camera.
    """
    eps = 1e-6
    pts = [c for c in corners_cam if c[2] > eps]
    if not pts:
        return None
    for i, j in _BOX_EDGES:
        a, b = corners_cam[i], corners_cam[j]
        if (a[2] > eps) != (b[2] > eps):
            t = (eps - a[2]) / (b[2] - a[2])
            pts.append(a + t * (b - a))
    uv = [project(p, k) for p in pts]
    us = [p[0] for p in uv]
    vs = [p[1] for p in uv]
    return min(us), min(vs), max(us), max(vs)


def _clip_fraction(bbox, k: CameraIntrinsics):
    """(clipped bbox or None, clipped/unclipped area ratio)."""
    x0, y0, x1, y1 = bbox
    cx0, cy0 = max(x0, 0.0), max(y0, 0.0)
    cx1, cy1 = min(x1, float(k.width)), min(y1, float(k.height))
    if cx1 <= cx0 or cy1 <= cy0:
        return None, 0.0
    full = (x1 - x0) * (y1 - y0)
    clipped = (cx1 - cx0) * (cy1 - cy0)
    return (cx0, cy0, cx1, cy1), clipped / full if full > 0 else 0.0


def _occlusion_factor(world: WorldModel, obj: SimObject) -> float:
    """Fraction of 5 footprint sample points with a free line of sight,
    ignoring the object's own cells."""
    xmin, ymin, xmax, ymax = obj.footprint
    cx, cy = (xmin + xmax) / 2.0, (ymin + ymax) / 2.0
    shrink = 0.8
    samples = [(cx, cy)] + [
        (cx + shrink * (x - cx), cy + shrink * (y - cy))
        for x in (xmin, xmax) for y in (ymin, ymax)
    ]
    visible = sum(
        0 if _occluded(world, s, exclude_object=obj.id) else 1 for s in samples
    )
    return visible / len(samples)


def render_object_boxes(world: WorldModel, robot_pose: Pose2 | None = None):
    """Image-space boxes for all map objects from the robot camera.

    Returns [(object_id, clipped bbox, visible_fraction)], where
    visible_fraction combines in-image area ratio and grid occlusion.
    """
    if robot_pose is not None and robot_pose != world.robot.pose:
        world = dataclasses.replace(
            world, robot=dataclasses.replace(world.robot, pose=robot_pose)
        )
    k = world.robot.intrinsics
    T_cam_map = world.camera_transform().inverse()
    out = []
    for obj in world.objects:
        corners = [T_cam_map.apply(c) for c in _box_corners(obj.footprint, obj.height)]
        bbox = _projected_bbox(corners, k)
        if bbox is None:
            continue
        clipped, frac = _clip_fraction(bbox, k)
        if clipped is None:
            continue
        vf = frac * _occlusion_factor(world, obj)
        if vf > 0:
            out.append((obj.id, clipped, vf))
    return out


def render_view(world: WorldModel):
    """Grounding input: [(id, bbox, visible_fraction, class_label, attributes)]
    covering map objects and instructors (as class 'person')."""
    entries = [
        (oid, bbox, vf, obj.class_label, obj.attributes)
        for (oid, bbox, vf) in render_object_boxes(world)
        for obj in [next(o for o in world.objects if o.id == oid)]
    ]
    k = world.robot.intrinsics
    T_cam_map = world.camera_transform().inverse()
    for ins in world.instructors:
        joints_cam = [T_cam_map.apply(p) for p in ins.map_joints().values()]
        pix = _project_many(joints_cam, k)
        if not pix:
            continue
        us = [p[0] for p in pix]
        vs = [p[1] for p in pix]
        pad_x = BBOX_PAD * (max(us) - min(us))
        pad_y = BBOX_PAD * (max(vs) - min(vs))
        bbox = (min(us) - pad_x, min(vs) - pad_y, max(us) + pad_x, max(vs) + pad_y)
        clipped, frac = _clip_fraction(bbox, k)
        if clipped is None:
            continue
        occ = 0.0 if _occluded(world, (ins.base.x, ins.base.y)) else 1.0
        vf = frac * occ
        if vf > 0:
            entries.append((ins.id, clipped, vf, "person", frozenset()))
    return entries


def in_frame_fraction(world: WorldModel, obj: SimObject) -> float:
    """Fraction of the object's projected box inside the image.

    Ignores occlusion: this measures whether the box left the frame, not
    whether something stands in front of it.
    """
    k = world.robot.intrinsics
    T_cam_map = world.camera_transform().inverse()
    corners = [T_cam_map.apply(c) for c in _box_corners(obj.footprint, obj.height)]
    bbox = _projected_bbox(corners, k)
    if bbox is None:
        return 0.0
    clipped, frac = _clip_fraction(bbox, k)
    if clipped is None:
        return 0.0
    return frac


def object_fully_in_view(world: WorldModel, obj: SimObject) -> bool:
    """True when the object's whole projected box lies inside the image."""
    k = world.robot.intrinsics
    T_cam_map = world.camera_transform().inverse()
    corners = [T_cam_map.apply(c) for c in _box_corners(obj.footprint, obj.height)]
    if any(c[2] <= 1e-6 for c in corners):
        return False
    bbox = _projected_bbox(corners, k)
    x0, y0, x1, y1 = bbox
    return x0 >= 0 and y0 >= 0 and x1 <= k.width and y1 <= k.height


# ---------------------------------------------------------------------------
# Kinematics


def footprint_collides(world: WorldModel, pose: Pose2) -> bool:
    """Disk footprint test against walls and object cells."""
    grid = world.obstacle_grid()
    r = world.robot.radius
    res = grid.resolution
    row0, col0 = grid.world_to_cell(pose.x - r, pose.y - r)
    row1, col1 = grid.world_to_cell(pose.x + r, pose.y + r)
    for row in range(row0, row1 + 1):
        for col in range(col0, col1 + 1):
            if not grid.in_bounds(row, col):
                return True
            if grid.cells[row, col] != FREE:
                cx, cy = grid.cell_center(row, col)
                if math.hypot(cx - pose.x, cy - pose.y) <= r:
                    return True
    return False


def step_robot(world: WorldModel, v: float, w: float, dt: float):
    """One exact unicycle step; the motion is rejected (pose unchanged,
    collided=True) when the swept footprint would touch an obstacle.

    Returns (new world, collided).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    target = unicycle_step(world.robot.pose, v, w, dt)
    n_sub = max(1, int(math.ceil(abs(v) * dt / (0.5 * world.grid.resolution))))
    pose = world.robot.pose
    for i in range(1, n_sub + 1):
        sub = unicycle_step(world.robot.pose, v, w, dt * i / n_sub)
        if footprint_collides(world, sub):
            return world, True
        pose = sub
    assert abs(pose.x - target.x) < 1e-9 and abs(pose.y - target.y) < 1e-9
    new_robot = dataclasses.replace(world.robot, pose=target)
    return dataclasses.replace(world, robot=new_robot), False
