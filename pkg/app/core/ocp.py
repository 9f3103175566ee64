"""
Optimal control problems: cost terms and per-task problem factories
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.dynamics import DynamicsModel, LinearModel, make_model
from app.models.problem import ObstacleSet
from app.utils.errors import DimensionError
from config import Config

logger = logging.getLogger(__name__)

# (lx, lu, lxx, luu, lux), each with a leading batch axis
Derivatives = Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]


class CostTerm:
    """One additive term of the stage or terminal cost, batched over time"""

    def value(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivatives(self, X: np.ndarray, U: np.ndarray) -> Derivatives:
        raise NotImplementedError


def _zeros(n, m, c) -> Derivatives:
    return (np.zeros((n, m)), np.zeros((n, c)), np.zeros((n, m, m)),
            np.zeros((n, c, c)), np.zeros((n, c, m)))


class StateResidualCost(CostTerm):
    """
    sum_i w_i r_i(x)^2 with r = x - target.

    Angular dimensions use the residual (cos x - cos g, sin x - sin g), so
    targets that differ by 2*pi are the same goal.
    """

    def __init__(self, weights: Sequence[float], target: Sequence[float],
                 angular: Sequence[int] = ()):
        self.target = np.asarray(target, dtype=float)
        self.angular = tuple(angular)
        self.weights = np.asarray(weights, dtype=float)
        expected = self.target.shape[0] + len(self.angular)
        if self.weights.shape != (expected,):
            raise DimensionError(f"Expected {expected} residual weights, got {self.weights.shape}")

    def residual(self, X: np.ndarray) -> np.ndarray:
        columns = []
        for i in range(self.target.shape[0]):
            if i in self.angular:
                columns.append(np.cos(X[..., i]) - np.cos(self.target[i]))
                columns.append(np.sin(X[..., i]) - np.sin(self.target[i]))
            else:
                columns.append(X[..., i] - self.target[i])
        return np.stack(columns, axis=-1)

    def value(self, X, U):
        r = self.residual(X)
        return np.sum(self.weights * r ** 2, axis=-1)

    def derivatives(self, X, U):
        n, m = X.shape
        r = self.residual(X)
        out = _zeros(n, m, U.shape[1])
        lx, lxx = out[0], out[2]
        col = 0
        for i in range(m):
            if i in self.angular:
                s, c = np.sin(X[:, i]), np.cos(X[:, i])
                wc, ws = self.weights[col], self.weights[col + 1]
                rc, rs = r[:, col], r[:, col + 1]
                lx[:, i] = 2 * (wc * rc * -s + ws * rs * c)
                lxx[:, i, i] = 2 * (wc * s ** 2 + ws * c ** 2) + 2 * (wc * rc * -c + ws * rs * -s)
                col += 2
            else:
                lx[:, i] = 2 * self.weights[col] * r[:, col]
                lxx[:, i, i] = 2 * self.weights[col]
                col += 1
        return out


class ControlCost(CostTerm):
    """w * ||u - u_ref||^2"""

    def __init__(self, weight: float, reference: Sequence[float]):
        self.weight = float(weight)
        self.reference = np.asarray(reference, dtype=float)

    def value(self, X, U):
        return self.weight * np.sum((U - self.reference) ** 2, axis=-1)

    def derivatives(self, X, U):
        n, m = X.shape
        c = U.shape[1]
        out = _zeros(n, m, c)
        out[1][:] = 2 * self.weight * (U - self.reference)
        out[3][:] = 2 * self.weight * np.eye(c)
        return out


class QuadraticCost(CostTerm):
    """0.5 (x-x_ref)' Q (x-x_ref) + 0.5 u' R u with full matrices"""

    def __init__(self, Q, R=None, x_ref=None):
        self.Q = np.asarray(Q, dtype=float)
        self.R = None if R is None else np.asarray(R, dtype=float)
        self.x_ref = np.zeros(self.Q.shape[0]) if x_ref is None else np.asarray(x_ref, dtype=float)

    def value(self, X, U):
        dx = X - self.x_ref
        v = 0.5 * np.einsum('ni,ij,nj->n', dx, self.Q, dx)
        if self.R is not None:
            v = v + 0.5 * np.einsum('ni,ij,nj->n', U, self.R, U)
        return v

    def derivatives(self, X, U):
        n, m = X.shape
        c = U.shape[1]
        out = _zeros(n, m, c)
        out[0][:] = (X - self.x_ref) @ self.Q.T
        out[2][:] = self.Q
        if self.R is not None:
            out[1][:] = U @ self.R.T
            out[3][:] = self.R
        return out


class ObstacleCost(CostTerm):
    """
    w * max(0, margin - sd(p))^2 summed over cylinders.

    sd is the signed distance of the position p = x[position] to each
    cylinder, negative inside.
    """

    def __init__(self, obstacles: ObstacleSet, weight: float = Config.OBSTACLE_WEIGHT,
                 margin: float = Config.OBSTACLE_MARGIN, position: Sequence[int] = (0, 1, 2)):
        self.obstacles = obstacles
        self.weight = float(weight)
        self.margin = float(margin)
        self.position = list(position)

    def value(self, X, U):
        total = np.zeros(X.shape[0])
        p = X[:, self.position]
        for cyl in self.obstacles.cylinders:
            violation = np.maximum(0.0, self.margin - cyl.signed_distance(p))
            total += self.weight * violation ** 2
        return total

    def derivatives(self, X, U):
        n, m = X.shape
        out = _zeros(n, m, U.shape[1])
        lx, lxx = out[0], out[2]
        p = X[:, self.position]
        for cyl in self.obstacles.cylinders:
            q = cyl.offset(p)                                     # (n, 2)
            dist = np.linalg.norm(q, axis=1)
            violation = self.margin - (dist - cyl.radius)
            active = (violation > 0) & (dist > 1e-12)
            if not np.any(active):
                continue
            q, dist, violation = q[active], dist[active], violation[active]
            normal = q / dist[:, None]
            grad = -2 * self.weight * violation[:, None] * normal
            outer = np.einsum('ni,nj->nij', normal, normal)
            curvature = (np.eye(2)[None] - outer) / dist[:, None, None]
            hess = 2 * self.weight * (outer - violation[:, None, None] * curvature)

            dims = [self.position[i] for i in cyl.cross_dims]
            rows = np.flatnonzero(active)
            lx[np.ix_(rows, dims)] += grad
            for a, da in enumerate(dims):
                for b, db in enumerate(dims):
                    lxx[rows, da, db] += hess[:, a, b]
        return out


class OCProblem:
    """Dynamics, initial state, horizon and additive running/terminal costs"""

    def __init__(self, model: DynamicsModel, x0: Sequence[float], horizon: int,
                 running: List[CostTerm], terminal: List[CostTerm],
                 obstacles: Optional[ObstacleSet] = None, goal=None,
                 task: Optional[str] = None, success_cost: float = np.inf):
        self.model = model
        self.x0 = np.asarray(x0, dtype=float)
        if self.x0.shape != (model.state_dim,):
            raise DimensionError(f"x0 must have shape ({model.state_dim},), got {self.x0.shape}")
        if horizon < 2:
            raise ValueError(f"Horizon must be at least 2, got {horizon}")
        self.horizon = int(horizon)
        self.running = list(running)
        self.terminal = list(terminal)
        self.obstacles = obstacles or ObstacleSet()
        self.goal = None if goal is None else np.asarray(goal, dtype=float)
        self.task = task
        self.success_cost = float(success_cost)

    @property
    def state_dim(self) -> int:
        return self.model.state_dim

    @property
    def control_dim(self) -> int:
        return self.model.control_dim

    def check_trajectory(self, X: np.ndarray, U: np.ndarray):
        if X.shape != (self.horizon, self.state_dim) or \
                U.shape != (self.horizon - 1, self.control_dim):
            raise DimensionError(
                f"Expected X {(self.horizon, self.state_dim)} and U "
                f"{(self.horizon - 1, self.control_dim)}, got {X.shape} and {U.shape}")

    def running_cost(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        return sum((term.value(X, U) for term in self.running), np.zeros(X.shape[0]))

    def terminal_cost(self, x: np.ndarray) -> float:
        X = x[None]
        U = np.zeros((1, self.control_dim))
        return float(sum((term.value(X, U) for term in self.terminal), np.zeros(1))[0])

    def cost(self, X: np.ndarray, U: np.ndarray) -> float:
        """Sum of running costs over t < T-1 plus the terminal cost"""
        X = np.asarray(X, dtype=float)
        U = np.asarray(U, dtype=float)
        self.check_trajectory(X, U)
        return float(np.sum(self.running_cost(X[:-1], U)) + self.terminal_cost(X[-1]))

    def running_derivatives(self, X: np.ndarray, U: np.ndarray) -> Derivatives:
        total = list(_zeros(X.shape[0], self.state_dim, self.control_dim))
        for term in self.running:
            for acc, part in zip(total, term.derivatives(X, U)):
                acc += part
        return tuple(total)

    def terminal_derivatives(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        X = x[None]
        U = np.zeros((1, self.control_dim))
        lx = np.zeros(self.state_dim)
        lxx = np.zeros((self.state_dim, self.state_dim))
        for term in self.terminal:
            d = term.derivatives(X, U)
            lx += d[0][0]
            lxx += d[2][0]
        return lx, lxx

    def cost_derivatives(self, x, u=None, terminal: bool = False):
        """
        First and second derivatives of one stage.

        Returns (lx, lu, lxx, luu, lux); the control parts are zero at the
        terminal stage.
        """
        x = np.asarray(x, dtype=float)
        if terminal:
            lx, lxx = self.terminal_derivatives(x)
            c = self.control_dim
            return lx, np.zeros(c), lxx, np.zeros((c, c)), np.zeros((c, self.state_dim))
        d = self.running_derivatives(x[None], np.asarray(u, dtype=float)[None])
        return tuple(part[0] for part in d)

    def collision_free(self, X: np.ndarray) -> bool:
        if not len(self.obstacles):
            return True
        return bool(np.all(self.obstacles.is_free(X[:, :3])))

    def __repr__(self):
        return (f"<OCProblem task={self.task} T={self.horizon} "
                f"obstacles={len(self.obstacles)}>")


def cartpole_goal_residual(x: np.ndarray) -> np.ndarray:
    """Terminal residual (x, cos th - cos pi, sin th - sin pi, x_dot, th_dot)"""
    term = StateResidualCost(np.ones(5), Config.TASKS['cartpole']['goal'], angular=(1,))
    return term.residual(np.asarray(x, dtype=float))


def make_cartpole_problem(x0: Sequence[float], settings: Optional[dict] = None) -> OCProblem:
    settings = settings or Config.TASKS['cartpole']
    model = make_model('cartpole', settings)
    goal = settings['goal']
    running = [ControlCost(Config.CONTROL_WEIGHT, np.zeros(model.control_dim))]
    if any(settings['running_state_weights']):
        running.append(StateResidualCost(settings['running_state_weights'], goal, angular=(1,)))
    terminal = [StateResidualCost(settings['terminal_weights'], goal, angular=(1,))]
    return OCProblem(model, x0, settings['horizon'], running, terminal, goal=goal,
                     task='cartpole', success_cost=settings.get('success_cost', np.inf))


def quadrotor_goal_state(settings: dict) -> np.ndarray:
    goal = np.zeros(12)
    goal[:3] = settings['goal']
    return goal


def make_quadrotor_problem(x0: Sequence[float], settings: Optional[dict] = None,
                           task: str = 'quadrotor') -> OCProblem:
    settings = settings or Config.TASKS[task]
    model = make_model('quadrotor', settings)
    goal = quadrotor_goal_state(settings)
    obstacles = ObstacleSet.from_list(settings.get('obstacles', []))
    running = [ControlCost(Config.CONTROL_WEIGHT, model.hover_thrust)]
    if any(settings['running_state_weights']):
        running.append(StateResidualCost(settings['running_state_weights'], goal))
    if len(obstacles):
        running.append(ObstacleCost(obstacles))
    terminal = [StateResidualCost(settings['terminal_weights'], goal)]
    if len(obstacles):
        terminal.append(ObstacleCost(obstacles))
    return OCProblem(model, x0, settings['horizon'], running, terminal, obstacles, goal,
                     task=task, success_cost=settings.get('success_cost', np.inf))


def make_task_problem(task: str, x0: Sequence[float], settings: Optional[dict] = None
                      ) -> OCProblem:
    settings = settings or Config.TASKS[task]
    if settings.get('model') == 'cartpole':
        return make_cartpole_problem(x0, settings)
    if settings.get('model') == 'quadrotor':
        return make_quadrotor_problem(x0, settings, task)
    raise ValueError(f"Task has no optimal control problem: {task}")


def make_lqr_problem(A, B, Q, R, Qf, x0, horizon: int, dt: float = 1.0) -> OCProblem:
    """Linear dynamics with 0.5 x'Qx + 0.5 u'Ru stages and 0.5 x'Qf x terminal"""
    model = LinearModel(A, B, dt)
    return OCProblem(model, x0, horizon, [QuadraticCost(Q, R)], [QuadraticCost(Qf)], task='lqr')
