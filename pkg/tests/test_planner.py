import numpy as np
import pytest

from app.core.planner import RRTConnectPlanner, rrt_connect
from app.models.problem import Cylinder, ObstacleSet
from app.utils.errors import PlanningError
from config import Config


@pytest.fixture
def pillar():
    return ObstacleSet([Cylinder('z', (0.0, 0.0), 0.75)])


@pytest.fixture
def three_cylinders():
    return ObstacleSet.from_list(Config.TASKS['quadrotor']['obstacles'])


def assert_collision_free(planner, path):
    for a, b in zip(path[:-1], path[1:]):
        assert planner.segment_free(a, b)


class TestPlan:

    def test_direct_line_when_visible(self, pillar):
        planner = RRTConnectPlanner(pillar)
        path = planner.plan([-2.0, 2.0, 0.0], [2.0, 2.0, 0.0])
        assert path.shape == (2, 3)

    def test_goes_around_pillar(self, pillar):
        planner = RRTConnectPlanner(pillar, rng=np.random.default_rng(5))
        start, goal = np.array([-2.0, 0.0, 0.0]), np.array([2.0, 0.0, 0.0])
        path = planner.plan(start, goal)
        np.testing.assert_array_equal(path[0], start)
        np.testing.assert_array_equal(path[-1], goal)
        assert_collision_free(planner, path)
        steps = np.linalg.norm(np.diff(path, axis=0), axis=1)
        assert np.all(steps <= Config.RRT_STEP + 1e-9)

    def test_three_cylinders(self, three_cylinders):
        planner = RRTConnectPlanner(three_cylinders, rng=np.random.default_rng(2))
        path = planner.plan([-2.0, -2.0, -2.0], [1.75, 1.75, 1.75])
        assert_collision_free(planner, path)

    def test_start_in_collision(self, pillar):
        with pytest.raises(ValueError):
            RRTConnectPlanner(pillar).plan([0.0, 0.0, 0.0], [2.0, 2.0, 0.0])

    def test_node_budget(self, pillar):
        planner = RRTConnectPlanner(pillar, max_nodes=4)
        with pytest.raises(PlanningError):
            planner.plan([-2.0, 0.0, 0.0], [2.0, 0.0, 0.0])

    def test_clearance_is_respected(self, pillar):
        planner = RRTConnectPlanner(pillar, clearance=0.3)
        assert not planner.point_free(np.array([1.0, 0.0, 0.0]))
        assert planner.point_free(np.array([1.1, 0.0, 0.0]))


class TestSmoothing:

    def test_shortcut_straightens_free_zigzag(self):
        planner = RRTConnectPlanner(ObstacleSet())
        path = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [2.0, 0.0, 0.0], [3.0, 1.0, 0.0]])
        np.testing.assert_array_equal(planner.shortcut(path), path[[0, 3]])

    def test_shortcut_keeps_detour(self, pillar):
        planner = RRTConnectPlanner(pillar)
        path = np.array([[-2.0, 0.0, 0.0], [-2.0, 2.0, 0.0], [2.0, 2.0, 0.0], [2.0, 0.0, 0.0]])
        short = planner.shortcut(path)
        assert short.shape[0] >= 3
        assert_collision_free(planner, short)

    def test_time_parameterize_is_uniform_in_arc_length(self):
        path = np.array([[0.0, 0.0], [3.0, 0.0], [3.0, 1.0]])
        out = RRTConnectPlanner.time_parameterize(path, 5)
        np.testing.assert_allclose(out, [[0, 0], [1, 0], [2, 0], [3, 0], [3, 1]], atol=1e-12)

    def test_time_parameterize_point_path(self):
        out = RRTConnectPlanner.time_parameterize(np.array([[1.0, 2.0], [1.0, 2.0]]), 4)
        np.testing.assert_array_equal(out, np.tile([1.0, 2.0], (4, 1)))

    def test_rrt_connect_is_seeded(self, pillar):
        a = rrt_connect([-2, 0, 0], [2, 0, 0], pillar, 20, rng=np.random.default_rng(7))
        b = rrt_connect([-2, 0, 0], [2, 0, 0], pillar, 20, rng=np.random.default_rng(7))
        assert a.shape == (20, 3)
        np.testing.assert_array_equal(a, b)
