import math

import numpy as np
import pytest

from gesturenav.errors import NotVisible, UnknownInstructor
from gesturenav.geometry import Pose2
from gesturenav.grid import OCCUPIED
from gesturenav.world import (
    JOINT_NAMES,
    InstructorModel,
    NoiseConfig,
    RngStreams,
    SimObject,
    WorldModel,
    object_fully_in_view,
    observe_person,
    render_object_boxes,
    render_view,
    step_robot,
)

from .conftest import chair, empty_grid, low_camera_robot, simple_world


class TestWorldInvariants:
    def test_duplicate_object_ids_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            simple_world(objects=(chair("c", 7, 5.5, "red"),
                                  chair("c", 8, 4.4, "blue")))

    def test_object_outside_grid_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            simple_world(objects=(chair("c", 20.0, 5.0, "red"),))

    def test_robot_outside_grid_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            simple_world(robot=low_camera_robot(x=-5.0))

    def test_unknown_instructor(self):
        world = simple_world()
        with pytest.raises(UnknownInstructor):
            world.instructor("nobody")

    def test_stature_bounds(self):
        with pytest.raises(ValueError):
            InstructorModel(id="i", base=Pose2(0, 0, 0), stature=0.5)

    def test_template_has_all_13_joints(self):
        ins = InstructorModel(id="i", base=Pose2(0, 0, 0))
        assert set(ins.joint_template) >= set(JOINT_NAMES)
        assert len(JOINT_NAMES) == 13


class TestObservePerson:
    def test_zero_noise_recovers_true_joints(self):
        world = simple_world()
        skel, head, det = observe_person(
            world, "guide", NoiseConfig.zero(), RngStreams.from_seed(0)
        )
        T = world.camera_transform().inverse()
        true_cam = {n: T.apply(p) for n, p in
                    world.instructor("guide").map_joints().items()}
        for name in JOINT_NAMES:
            assert np.allclose(skel.joints[name], true_cam[name], atol=1e-9)
        assert det.foot_visible

    def test_zero_noise_gaze_points_at_target(self):
        world = simple_world()
        _, head, _ = observe_person(
            world, "guide", NoiseConfig.zero(), RngStreams.from_seed(0)
        )
        ins = world.instructor("guide")
        T = world.camera_transform().inverse()
        expect = T.apply(np.asarray(ins.gaze_target, float)) - T.apply(
            ins.map_joints()["head"]
        )
        expect = expect / np.linalg.norm(expect)
        assert np.allclose(head.gaze_dir, expect, atol=1e-9)

    def test_behind_camera_not_visible(self):
        world = simple_world(robot=low_camera_robot(x=8.0, y=2.0, theta=0.0))
        with pytest.raises(NotVisible):
            observe_person(world, "guide", NoiseConfig.zero(), RngStreams.from_seed(0))

    def test_occluded_by_wall(self):
        grid = empty_grid()
        cells = grid.cells.copy()
        cells[int(2.0 / 0.05), int(3.0 / 0.05):int(4.0 / 0.05)] = OCCUPIED
        world = simple_world(grid=type(grid)(grid.resolution, grid.origin, cells))
        with pytest.raises(NotVisible, match="occluded"):
            observe_person(world, "guide", NoiseConfig.zero(), RngStreams.from_seed(0))

    def test_foot_out_of_frame_flagged(self):
        # Instructor so close that the ankles project below the image.
        world = simple_world(instructor_pose=(2.55, 2.0, math.pi))
        _, _, det = observe_person(
            world, "guide", NoiseConfig.zero(), RngStreams.from_seed(0)
        )
        assert not det.foot_visible

    def test_determinism(self):
        world = simple_world()
        a = observe_person(world, "guide", NoiseConfig(), RngStreams.from_seed(9))
        b = observe_person(world, "guide", NoiseConfig(), RngStreams.from_seed(9))
        for name in JOINT_NAMES:
            assert np.array_equal(a[0].joints[name], b[0].joints[name])
        assert np.array_equal(a[1].gaze_dir, b[1].gaze_dir)
        assert a[2].bbox == b[2].bbox

    def test_noise_streams_independent(self):
        # Turning bbox noise on must not shift the skeleton's draws.
        world = simple_world()
        base = NoiseConfig(joint_sigma=0.02, gaze_sigma=0.0, bbox_sigma=0.0,
                           nonmetric_scale_range=(1.0, 1.0))
        plus = NoiseConfig(joint_sigma=0.02, gaze_sigma=0.0, bbox_sigma=3.0,
                           nonmetric_scale_range=(1.0, 1.0))
        a = observe_person(world, "guide", base, RngStreams.from_seed(4))
        b = observe_person(world, "guide", plus, RngStreams.from_seed(4))
        for name in JOINT_NAMES:
            assert np.array_equal(a[0].joints[name], b[0].joints[name])
        assert a[2].bbox != b[2].bbox

    def test_nonmetric_scale_applied_globally(self):
        world = simple_world()
        cfg = NoiseConfig(joint_sigma=0.0, gaze_sigma=0.0, bbox_sigma=0.0,
                          nonmetric_scale_range=(2.0, 2.0))
        skel, _, _ = observe_person(world, "guide", cfg, RngStreams.from_seed(0))
        exact, _, _ = observe_person(
            world, "guide", NoiseConfig.zero(), RngStreams.from_seed(0)
        )
        for name in JOINT_NAMES:
            assert np.allclose(skel.joints[name], 2.0 * exact.joints[name], atol=1e-9)


class TestRenderObjects:
    def test_centered_object_fully_visible(self):
        obj = chair("c", 4.0, 2.0, "red")
        world = simple_world(objects=(obj,),
                             robot=low_camera_robot(x=2.0, y=2.0, theta=0.0))
        boxes = dict((oid, vf) for oid, _, vf in render_object_boxes(world))
        assert boxes["c"] == pytest.approx(1.0, abs=1e-6)
        assert object_fully_in_view(world, obj)

    def test_object_behind_camera_excluded(self):
        world = simple_world(objects=(chair("c", 1.0, 2.0, "red"),),
                             robot=low_camera_robot(x=2.0, y=2.0, theta=0.0))
        assert render_object_boxes(world) == []

    def test_half_out_of_image(self):
        # Tall thin box centered at the left image edge: about half the
        # projected area is clipped.
        obj = SimObject("pole", "plant", frozenset(), (3.95, 3.4, 4.05, 3.6), 0.6)
        theta = math.atan2(1.5, 2.0)
        world = simple_world(objects=(obj,),
                             robot=low_camera_robot(x=2.0, y=2.0, theta=theta))
        k = world.robot.intrinsics
        # Point the camera so the object center projects onto the left edge.
        from gesturenav.geometry import project
        T = world.camera_transform().inverse()
        center = T.apply([4.0, 3.5, 0.3])
        # Rotate until u ~ 0 by solving the bearing directly.
        off = math.atan2(center[0], center[2]) - math.atan2(-k.c_x, k.f_x)
        world = simple_world(objects=(obj,),
                             robot=low_camera_robot(x=2.0, y=2.0, theta=theta + off))
        boxes = dict((oid, vf) for oid, _, vf in render_object_boxes(world))
        assert boxes["pole"] == pytest.approx(0.5, abs=0.1)

    def test_occluded_object_dropped(self):
        grid = empty_grid()
        cells = grid.cells.copy()
        cells[int(1.5 / 0.05):int(2.6 / 0.05), int(2.5 / 0.05):int(5.0 / 0.05)] = OCCUPIED
        world = simple_world(
            grid=type(grid)(grid.resolution, grid.origin, cells),
            objects=(chair("c", 6.0, 2.0, "red"),),
            robot=low_camera_robot(x=2.0, y=2.0, theta=0.0),
        )
        boxes = dict((oid, vf) for oid, _, vf in render_object_boxes(world))
        assert boxes.get("c", 0.0) == 0.0

    def test_render_view_includes_instructor_as_person(self):
        world = simple_world()
        view = render_view(world)
        by_id = {e[0]: e for e in view}
        assert "guide" in by_id
        assert by_id["guide"][3] == "person"


class TestStepRobot:
    def test_straight(self):
        world = simple_world()
        out, collided = step_robot(world, 1.0, 0.0, 1.0)
        assert not collided
        assert (out.robot.pose.x, out.robot.pose.y) == pytest.approx((3.0, 2.0))

    def test_rotate_in_place(self):
        world = simple_world()
        out, collided = step_robot(world, 0.0, math.pi / 2, 1.0)
        assert not collided
        assert out.robot.pose.theta == pytest.approx(math.pi / 2)

    def test_arc(self):
        world = simple_world()
        out, _ = step_robot(world, math.pi / 2, math.pi / 2, 1.0)
        p = out.robot.pose
        assert (p.x - 2.0, p.y - 2.0, p.theta) == pytest.approx((1, 1, math.pi / 2))

    def test_collision_rejected(self):
        world = simple_world(robot=low_camera_robot(x=0.5, y=2.0, theta=math.pi))
        out, collided = step_robot(world, 1.0, 0.0, 1.0)
        assert collided
        assert out.robot.pose == world.robot.pose

    def test_collision_with_object(self):
        world = simple_world(objects=(chair("c", 3.0, 2.0, "red"),))
        out, collided = step_robot(world, 1.0, 0.0, 1.0)
        assert collided
        assert out.robot.pose == world.robot.pose
