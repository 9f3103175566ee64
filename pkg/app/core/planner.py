"""
RRT-Connect path planner for point robots among cylinders
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.models.problem import ObstacleSet
from app.utils.errors import PlanningError
from config import Config

logger = logging.getLogger(__name__)

TRAPPED, ADVANCED, REACHED = 0, 1, 2


class _Tree:
    """Nodes with parent pointers in a preallocated array"""

    def __init__(self, root: np.ndarray, capacity: int):
        self.nodes = np.empty((capacity, root.shape[0]))
        self.parents = np.full(capacity, -1, dtype=int)
        self.nodes[0] = root
        self.size = 1

    def nearest(self, point: np.ndarray) -> int:
        diff = self.nodes[:self.size] - point
        return int(np.argmin(np.einsum('ij,ij->i', diff, diff)))

    def add(self, point: np.ndarray, parent: int) -> int:
        self.nodes[self.size] = point
        self.parents[self.size] = parent
        self.size += 1
        return self.size - 1

    def path_to_root(self, index: int) -> List[np.ndarray]:
        path = []
        while index >= 0:
            path.append(self.nodes[index].copy())
            index = self.parents[index]
        return path


class RRTConnectPlanner:
    """Bidirectional RRT with greedy connect, shortcut smoothing and arc-length timing"""

    def __init__(self, obstacles: ObstacleSet,
                 bounds: Tuple[Sequence[float], Sequence[float]] = Config.RRT_WORKSPACE,
                 step: float = Config.RRT_STEP, max_nodes: int = Config.RRT_MAX_NODES,
                 resolution: float = Config.COLLISION_RESOLUTION,
                 clearance: float = Config.RRT_CLEARANCE,
                 rng: Optional[np.random.Generator] = None):
        self.obstacles = obstacles
        self.lo = np.asarray(bounds[0], dtype=float)
        self.hi = np.asarray(bounds[1], dtype=float)
        self.step = step
        self.max_nodes = max_nodes
        self.resolution = resolution
        self.clearance = clearance
        self.rng = rng or np.random.default_rng(0)

    def point_free(self, point: np.ndarray) -> bool:
        return bool(self.obstacles.is_free(point, self.clearance))

    def segment_free(self, a: np.ndarray, b: np.ndarray) -> bool:
        """Collision check at ``resolution`` spacing along a-b"""
        length = np.linalg.norm(b - a)
        samples = max(2, int(np.ceil(length / self.resolution)) + 1)
        points = a + np.linspace(0.0, 1.0, samples)[:, None] * (b - a)
        return bool(np.all(self.obstacles.is_free(points, self.clearance)))

    def _extend(self, tree: _Tree, target: np.ndarray) -> Tuple[int, int]:
        near = tree.nearest(target)
        origin = tree.nodes[near]
        delta = target - origin
        dist = np.linalg.norm(delta)
        new = target if dist <= self.step else origin + delta * (self.step / dist)
        if not self.segment_free(origin, new):
            return TRAPPED, -1
        index = tree.add(new, near)
        return (REACHED if dist <= self.step else ADVANCED), index

    def _connect(self, tree: _Tree, target: np.ndarray) -> Tuple[int, int]:
        status, index = ADVANCED, -1
        while status == ADVANCED and tree.size < self.max_nodes:
            status, index = self._extend(tree, target)
        return status, index

    def plan(self, start: Sequence[float], goal: Sequence[float]) -> np.ndarray:
        """
        Collision-free polyline from start to goal.

        Raises PlanningError when the node budget runs out.
        """
        start = np.asarray(start, dtype=float)
        goal = np.asarray(goal, dtype=float)
        if not self.point_free(start) or not self.point_free(goal):
            raise ValueError("Start and goal must be collision-free")
        if self.segment_free(start, goal):
            return np.vstack([start, goal])

        tree_a = _Tree(start, self.max_nodes + 1)
        tree_b = _Tree(goal, self.max_nodes + 1)
        a_is_start = True
        while tree_a.size + tree_b.size < self.max_nodes:
            sample = self.rng.uniform(self.lo, self.hi)
            status, new_index = self._extend(tree_a, sample)
            if status != TRAPPED:
                target = tree_a.nodes[new_index]
                status_b, index_b = self._connect(tree_b, target)
                if status_b == REACHED:
                    half_a = tree_a.path_to_root(new_index)[::-1]
                    half_b = tree_b.path_to_root(index_b)[1:]
                    path = np.array(half_a + half_b)
                    return path if a_is_start else path[::-1]
            tree_a, tree_b = tree_b, tree_a
            a_is_start = not a_is_start

        raise PlanningError(f"RRT-Connect exhausted {self.max_nodes} nodes")

    def shortcut(self, path: np.ndarray) -> np.ndarray:
        """Greedy pass that jumps to the farthest waypoint visible from each kept one"""
        kept = [0]
        i = 0
        last = path.shape[0] - 1
        while i < last:
            j = last
            while j > i + 1 and not self.segment_free(path[i], path[j]):
                j -= 1
            kept.append(j)
            i = j
        return path[kept]

    @staticmethod
    def time_parameterize(path: np.ndarray, knots: int) -> np.ndarray:
        """Resample a polyline to ``knots`` points equally spaced in arc length"""
        seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
        arc = np.r_[0.0, np.cumsum(seg)]
        if arc[-1] == 0.0:
            return np.repeat(path[:1], knots, axis=0)
        targets = np.linspace(0.0, arc[-1], knots)
        out = np.column_stack([np.interp(targets, arc, path[:, d]) for d in range(path.shape[1])])
        out[0] = path[0]
        out[-1] = path[-1]
        return out


def rrt_connect(start, goal, obstacles: ObstacleSet, knots: int,
                rng: Optional[np.random.Generator] = None, **planner_options) -> np.ndarray:
    """Smoothed, time-parameterized collision-free path with ``knots`` positions"""
    planner = RRTConnectPlanner(obstacles, rng=rng, **planner_options)
    raw = planner.plan(start, goal)
    smooth = planner.shortcut(raw)
    logger.debug("RRT-Connect path: %d raw waypoints, %d after shortcutting",
                 raw.shape[0], smooth.shape[0])
    return RRTConnectPlanner.time_parameterize(smooth, knots)
