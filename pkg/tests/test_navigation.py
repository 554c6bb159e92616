import math

import numpy as np
import pytest

from gesturenav.errors import GoalOccupied, NoPath, OriginOutsideGrid
from gesturenav.geometry import Pose2
from gesturenav.grid import (
    FREE,
    OCCUPIED,
    SAFETY_MARGIN_CELLS,
    UNKNOWN,
    OccupancyGrid,
    PathFollower,
    follow,
    inflate,
    line_of_sight,
    load_pgm,
    parse_inline_grid,
    plan,
    raycast,
    save_pgm,
)
from gesturenav.motion import unicycle_step

from .oracles import dijkstra_cells


def grid_from(cells, resolution=1.0):
    return OccupancyGrid(resolution, Pose2(0, 0, 0), np.array(cells, dtype=np.uint8))


class TestInflate:
    def test_zero_radius_identity(self):
        g = grid_from(np.zeros((5, 5)))
        g.cells[2, 2] = OCCUPIED
        out = inflate(g, 0.0)
        assert np.array_equal(out.cells, g.cells)

    def test_one_cell_radius_gives_3x3_block(self):
        g = grid_from(np.zeros((5, 5)))
        g.cells[2, 2] = OCCUPIED
        out = inflate(g, 1.0)
        expect = np.zeros((5, 5), dtype=np.uint8)
        expect[1:4, 1:4] = OCCUPIED
        assert np.array_equal(out.cells, expect)

    def test_huge_radius_fills_grid(self):
        g = grid_from(np.zeros((6, 6)))
        g.cells[0, 0] = OCCUPIED
        out = inflate(g, 100.0)
        assert (out.cells == OCCUPIED).all()

    def test_unknown_treated_as_obstacle(self):
        g = grid_from(np.zeros((5, 5)))
        g.cells[2, 2] = UNKNOWN
        out = inflate(g, 1.0)
        assert out.cells[1, 1] == OCCUPIED


class TestRaycast:
    def test_free_grid_reaches_max_range(self):
        g = grid_from(np.zeros((40, 40)), resolution=0.05)
        rng, hit = raycast(g, (1.0, 1.0), 0.0, 0.9)
        assert rng == pytest.approx(0.9) and not hit

    def test_wall_distance(self):
        g = grid_from(np.zeros((100, 100)), resolution=0.05)
        g.cells[:, 60:] = OCCUPIED  # wall face at x = 3.0
        rng, hit = raycast(g, (1.0, 1.0), 0.0, 10.0)
        assert hit
        assert 1.95 <= rng <= 2.05

    def test_origin_occupied(self):
        g = grid_from(np.zeros((5, 5)))
        g.cells[0, 0] = OCCUPIED
        assert raycast(g, (0.5, 0.5), 0.0, 5.0) == (0.0, True)

    def test_origin_outside(self):
        g = grid_from(np.zeros((5, 5)))
        with pytest.raises(OriginOutsideGrid):
            raycast(g, (-1.0, 0.0), 0.0, 5.0)

    def test_diagonal_matches_analytic(self):
        g = grid_from(np.zeros((100, 100)), resolution=0.05)
        g.cells[40:, :] = OCCUPIED  # wall face at y = 2.0
        az = math.atan2(1.0, 1.0)
        rng, hit = raycast(g, (0.5, 0.5), az, 10.0)
        assert hit
        assert rng == pytest.approx(1.5 * math.sqrt(2), abs=0.08)


class TestPlan:
    def test_empty_grid_near_diagonal_length(self):
        g = grid_from(np.zeros((16, 16)), resolution=0.25)
        # Inflation only eats the borders when there are no obstacles.
        start = Pose2(*g.cell_center(3, 3))
        goal = Pose2(*g.cell_center(12, 12))
        path = plan(g, start, goal, robot_radius=0.0)
        assert path.length == pytest.approx(9 * math.sqrt(2) * 0.25, abs=0.25)

    def test_start_equals_goal(self):
        g = grid_from(np.zeros((16, 16)), resolution=0.25)
        p = Pose2(*g.cell_center(8, 8), 0.4)
        path = plan(g, p, Pose2(p.x, p.y, 1.0), robot_radius=0.0)
        assert len(path.waypoints) == 1
        assert path.length == 0.0
        assert path.waypoints[-1].theta == pytest.approx(1.0)

    def test_goal_in_wall(self):
        g = grid_from(np.zeros((16, 16)), resolution=0.25)
        g.cells[8, 8] = OCCUPIED
        with pytest.raises(GoalOccupied):
            plan(g, Pose2(*g.cell_center(3, 3)), Pose2(*g.cell_center(8, 8)), 0.0)

    def test_disconnected_components(self):
        g = grid_from(np.zeros((20, 20)), resolution=0.25)
        g.cells[:, 10] = OCCUPIED
        with pytest.raises(NoPath):
            plan(g, Pose2(*g.cell_center(10, 3)), Pose2(*g.cell_center(10, 16)), 0.0)

    def test_waypoints_are_line_of_sight_free(self):
        rng = np.random.default_rng(5)
        g = grid_from((rng.random((32, 32)) < 0.15).astype(np.uint8), resolution=0.5)
        inflated = inflate(g, SAFETY_MARGIN_CELLS * g.resolution)
        free = np.argwhere(inflated.cells == FREE)
        start = Pose2(*inflated.cell_center(*free[10]))
        goal = Pose2(*inflated.cell_center(*free[-10]))
        try:
            path = plan(g, start, goal, robot_radius=0.0)
        except NoPath:
            pytest.skip("random grid disconnected")
        for a, b in zip(path.waypoints, path.waypoints[1:]):
            assert line_of_sight(inflated, (a.x, a.y), (b.x, b.y))

    def test_symmetry(self):
        rng = np.random.default_rng(11)
        g = grid_from((rng.random((32, 32)) < 0.12).astype(np.uint8), resolution=0.5)
        inflated = inflate(g, SAFETY_MARGIN_CELLS * g.resolution)
        free = np.argwhere(inflated.cells == FREE)
        a = Pose2(*inflated.cell_center(*free[5]))
        b = Pose2(*inflated.cell_center(*free[-5]))
        try:
            ab = plan(g, a, b, 0.0).length
            ba = plan(g, b, a, 0.0).length
        except NoPath:
            pytest.skip("random grid disconnected")
        assert abs(ab - ba) < math.sqrt(2) * g.resolution

    def test_matches_dijkstra_oracle(self):
        rng = np.random.default_rng(2)
        checked = 0
        while checked < 20:
            g = grid_from((rng.random((32, 32)) < 0.2).astype(np.uint8),
                          resolution=0.5)
            inflated = inflate(g, SAFETY_MARGIN_CELLS * g.resolution)
            free = np.argwhere(inflated.cells == FREE)
            if len(free) < 10:
                continue
            s = tuple(free[rng.integers(len(free))])
            t = tuple(free[rng.integers(len(free))])
            oracle = dijkstra_cells(inflated.cells == FREE, s, t)
            if oracle is None or oracle == 0:
                continue
            path = plan(g, Pose2(*inflated.cell_center(*s)),
                        Pose2(*inflated.cell_center(*t)), 0.0)
            assert path.length <= 1.1 * oracle * g.resolution + 1e-9
            checked += 1


class TestFollower:
    def test_single_waypoint_at_pose_gives_no_commands(self):
        g = grid_from(np.zeros((16, 16)), resolution=0.25)
        p = Pose2(1.0, 1.0, 0.5)
        path = plan(g, p, p, 0.0)
        cmds = follow(path, p, v_max=0.5, w_max=1.5, dt=0.1, resolution=0.25)
        assert cmds == []

    def test_straight_path_converges(self):
        g = grid_from(np.zeros((40, 40)), resolution=0.25)
        start = Pose2(1.0, 5.0, 0.0)
        goal = Pose2(3.0, 5.0, 0.0)
        path = plan(g, start, goal, 0.0)
        cmds = follow(path, start, v_max=0.5, w_max=1.5, dt=0.1, resolution=0.25)
        pose = start
        for v, w in cmds:
            pose = unicycle_step(pose, v, w, 0.1)
        assert math.hypot(pose.x - 3.0, pose.y - 5.0) < 0.5 * 0.25
        assert len(cmds) >= 2.0 / 0.5 / 0.1 * 0.7  # mostly drive steps

    def test_stall_detection(self):
        g = grid_from(np.zeros((16, 16)), resolution=0.25)
        path = plan(g, Pose2(1, 1, 0), Pose2(3, 1, 0), 0.0)
        f = PathFollower(path, 0.25)
        pose = Pose2(1, 1, 0)
        stalled = False
        for _ in range(200):
            stalled = f.update_progress(pose, 0.1)  # robot never moves
            if stalled:
                break
        assert stalled


class TestPgmIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        cells = rng.integers(0, 3, size=(20, 30)).astype(np.uint8)
        g = OccupancyGrid(0.1, Pose2(-1.0, 2.0, 0.0), cells)
        save_pgm(g, tmp_path / "m.pgm", tmp_path / "m.yaml")
        back = load_pgm(tmp_path / "m.pgm", tmp_path / "m.yaml")
        assert back.resolution == pytest.approx(0.1)
        assert (back.origin.x, back.origin.y) == pytest.approx((-1.0, 2.0))
        assert np.array_equal(back.cells, g.cells)

    def test_inline_grid_orientation(self):
        g = parse_inline_grid(["#.", ".."], 1.0)
        # first text row is the top of the map (highest y)
        assert g.cells[1, 0] == OCCUPIED  # y index 1 = top row
        assert g.cells[0, 0] == FREE
        assert not g.is_free(0.5, 1.5)
        assert g.is_free(0.5, 0.5)


class TestUnicycle:
    def test_straight(self):
        p = unicycle_step(Pose2(0, 0, 0), 1.0, 0.0, 1.0)
        assert (p.x, p.y, p.theta) == pytest.approx((1, 0, 0))

    def test_turn_in_place(self):
        p = unicycle_step(Pose2(0, 0, 0), 0.0, math.pi / 2, 1.0)
        assert (p.x, p.y, p.theta) == pytest.approx((0, 0, math.pi / 2))

    def test_quarter_arc(self):
        p = unicycle_step(Pose2(0, 0, 0), math.pi / 2, math.pi / 2, 1.0)
        assert (p.x, p.y, p.theta) == pytest.approx((1, 1, math.pi / 2))
