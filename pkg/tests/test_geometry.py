import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gesturenav.errors import BehindCamera, OutOfImage, VerticalRay
from gesturenav.geometry import (
    CameraIntrinsics,
    Pose2,
    Ray3,
    Transform3,
    angle_between,
    bearing_of_pixel,
    camera_to_map,
    compose,
    ground_project,
    project,
    rot_z,
    wrap_angle,
)

K = CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)


def random_transform(rng):
    # Random rotation via QR of a Gaussian matrix, sign-fixed to det +1.
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return Transform3(q, rng.normal(size=3))


class TestPose2:
    def test_theta_normalized(self):
        assert Pose2(0, 0, 3 * math.pi).theta == pytest.approx(math.pi)
        assert Pose2(0, 0, -math.pi).theta == pytest.approx(math.pi)

    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-10, 10))
    def test_compose_inverse_is_identity(self, x, y, theta):
        p = Pose2(x, y, theta)
        ident = p.compose(p.inverse())
        assert abs(ident.x) < 1e-9 and abs(ident.y) < 1e-9
        assert abs(wrap_angle(ident.theta)) < 1e-9

    def test_compose_translation(self):
        p = Pose2(1, 2, math.pi / 2).compose(Pose2(1, 0, 0))
        assert (p.x, p.y) == pytest.approx((1, 3))


class TestTransform3:
    def test_identity_compose(self):
        rng = np.random.default_rng(0)
        t = random_transform(rng)
        out = compose(Transform3.identity(), t)
        assert np.allclose(out.rotation, t.rotation)
        assert np.allclose(out.translation, t.translation)

    def test_inverse_compose(self):
        rng = np.random.default_rng(1)
        t = random_transform(rng)
        out = compose(t, t.inverse())
        assert np.allclose(out.rotation, np.eye(3), atol=1e-9)
        assert np.allclose(out.translation, 0.0, atol=1e-9)

    def test_rotation_composition_adds_angles(self):
        a = Transform3(rot_z(math.radians(30)), np.zeros(3))
        b = Transform3(rot_z(math.radians(60)), np.zeros(3))
        assert np.allclose(compose(a, b).rotation, rot_z(math.radians(90)), atol=1e-12)

    def test_compose_matches_sequential_apply(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a, b = random_transform(rng), random_transform(rng)
            p = rng.normal(size=3)
            assert np.allclose(compose(a, b).apply(p), a.apply(b.apply(p)), atol=1e-9)

    def test_composition_associative(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b, c = (random_transform(rng) for _ in range(3))
            left = compose(compose(a, b), c)
            right = compose(a, compose(b, c))
            assert np.allclose(left.rotation, right.rotation, atol=1e-9)
            assert np.allclose(left.translation, right.translation, atol=1e-9)

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            Transform3(np.eye(3) * 2, np.zeros(3))
        with pytest.raises(ValueError):
            Transform3(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


class TestProjection:
    def test_principal_point(self):
        assert project((0, 0, 2), K) == pytest.approx((320, 240))

    def test_offset_point(self):
        assert project((1, 0, 2), K) == pytest.approx((570, 240))

    def test_behind_camera(self):
        with pytest.raises(BehindCamera):
            project((0, 0, -1), K)
        with pytest.raises(BehindCamera):
            project((0, 0, 0), K)

    def test_bearing_principal_point(self):
        ray = bearing_of_pixel((320, 240), K)
        assert np.allclose(ray.direction, [0, 0, 1])

    def test_bearing_offset(self):
        ray = bearing_of_pixel((570, 240), K)
        expect = np.array([0.5, 0, 1.0])
        assert np.allclose(ray.direction, expect / np.linalg.norm(expect))

    def test_bearing_out_of_image(self):
        with pytest.raises(OutOfImage):
            bearing_of_pixel((-1, 0), K)

    def test_roundtrip_1000_points(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            z = rng.uniform(0.2, 20.0)
            u = rng.uniform(0, K.width - 1e-6)
            v = rng.uniform(0, K.height - 1e-6)
            p = np.array([(u - K.c_x) / K.f_x * z, (v - K.c_y) / K.f_y * z, z])
            ray = bearing_of_pixel(project(p, K), K)
            assert angle_between(ray.direction, p) < 1e-6


class TestGroundProject:
    def test_east(self):
        assert ground_project(Ray3(np.zeros(3), [1, 0, 0])) == pytest.approx(0.0)

    def test_z_component_ignored(self):
        az = ground_project(Ray3(np.zeros(3), [1, 1, -0.2]))
        assert az == pytest.approx(math.pi / 4)

    def test_vertical(self):
        with pytest.raises(VerticalRay):
            ground_project(Ray3(np.zeros(3), [0, 0, -1]))


class TestCameraToMap:
    def test_forward_aligned(self):
        T = camera_to_map(Pose2(0, 0, 0), 1.0)
        d = T.apply_direction([0, 0, 1])
        assert ground_project(Ray3(np.zeros(3), d)) == pytest.approx(0.0)

    def test_rotated_robot(self):
        T = camera_to_map(Pose2(0, 0, math.pi / 2), 1.0)
        d = T.apply_direction([0, 0, 1])
        assert ground_project(Ray3(np.zeros(3), d)) == pytest.approx(math.pi / 2)

    def test_camera_right_maps_to_negative_heading_side(self):
        T = camera_to_map(Pose2(0, 0, math.pi / 4), 1.0)
        d = T.apply_direction(np.array([1, 0, 1]) / math.sqrt(2))
        assert ground_project(Ray3(np.zeros(3), d)) == pytest.approx(0.0, abs=1e-9)

    def test_height_enters_translation(self):
        T = camera_to_map(Pose2(2, 3, 0), 1.2)
        assert np.allclose(T.apply([0, 0, 0]), [2, 3, 1.2])

    def test_two_step_equals_composed(self):
        # camera -> robot base -> map equals the single composed transform
        pose = Pose2(1.5, -2.0, 0.7)
        h = 1.1
        cam_to_base = camera_to_map(Pose2(0, 0, 0), h)
        base_to_map = Transform3(rot_z(pose.theta), np.array([pose.x, pose.y, 0.0]))
        composed = compose(base_to_map, cam_to_base)
        direct = camera_to_map(pose, h)
        rng = np.random.default_rng(7)
        for _ in range(20):
            p = rng.normal(size=3)
            assert np.allclose(direct.apply(p), composed.apply(p), atol=1e-9)


class TestRay3:
    def test_normalizes_direction(self):
        r = Ray3(np.zeros(3), [0, 0, 5])
        assert np.allclose(r.direction, [0, 0, 1])
        assert abs(np.linalg.norm(r.direction) - 1.0) < 1e-9

    def test_zero_direction_rejected(self):
        with pytest.raises(ValueError):
            Ray3(np.zeros(3), [0, 0, 0])

    def test_at(self):
        r = Ray3([1, 0, 0], [0, 1, 0])
        assert np.allclose(r.at(2.5), [1, 2.5, 0])
