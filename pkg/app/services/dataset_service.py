"""
Dataset Service
Generates solution datasets by solving many randomized problem instances
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.core.ocp import make_cartpole_problem, make_quadrotor_problem
from app.core.planner import rrt_connect
from app.core.solver import BoxFDDPSolver
from app.models.problem import ObstacleSet
from app.models.result import SolverOptions
from app.models.run_config import SampleSpec
from app.models.trajectory import Trajectory
from app.utils.errors import PlanningError, RolloutError
from config import Config

logger = logging.getLogger(__name__)


def sample_cartpole_start(rng: np.random.Generator, settings: dict) -> np.ndarray:
    span = np.asarray(settings['start_range'], dtype=float)
    return rng.uniform(-span, span)


def sample_quadrotor_start(rng: np.random.Generator, settings: dict,
                           clearance: float = Config.RRT_CLEARANCE) -> np.ndarray:
    """Hovering start state with a collision-free position"""
    obstacles = ObstacleSet.from_list(settings.get('obstacles', []))
    while True:
        position = rng.uniform(settings['start_low'], settings['start_high'])
        if obstacles.is_free(position, clearance):
            break
    state = np.zeros(12)
    state[:3] = position
    return state


def lift_path(path: np.ndarray, dt: float, start: np.ndarray) -> np.ndarray:
    """Quadrotor states from a position path: finite-difference velocity, level attitude"""
    states = np.zeros((path.shape[0], 12))
    states[:, :3] = path
    states[:, 6:9] = np.gradient(path, dt, axis=0)
    states[0] = start
    states[-1, 6:9] = 0.0
    return states


def _record(task: str, start: np.ndarray, result, dt: float, seed_index: int) -> Trajectory:
    meta = {'task': task, 'start': start.tolist(), 'seed_index': seed_index}
    meta.update(result.summary())
    return Trajectory(result.X, result.U, dt, meta)


def solve_cartpole_start(args) -> Tuple[List[Trajectory], int]:
    """All solutions for one start state: (trajectories, failed attempts)"""
    seed_seq, settings, per_start, max_retries, options = args
    rng = np.random.default_rng(seed_seq)
    start = sample_cartpole_start(rng, settings)
    problem = make_cartpole_problem(start, settings)
    solver = BoxFDDPSolver(problem, options)
    span = settings['seed_control_range']
    T = settings['horizon']

    solutions, failures, attempt = [], 0, 0
    while len(solutions) < per_start and failures < max_retries:
        U0 = rng.uniform(-span, span, (T - 1, problem.control_dim))
        attempt += 1
        try:
            X0 = problem.model.rollout(start, U0)
        except RolloutError:
            failures += 1
            continue
        result = solver.solve(X0, U0)
        if result.converged:
            solutions.append(_record('cartpole', start, result, problem.model.dt, attempt))
        else:
            failures += 1
    return solutions, failures


def solve_quadrotor_instance(args) -> Tuple[List[Trajectory], int]:
    """One solution from an RRT-Connect seed, retried up to ``max_retries`` times"""
    seed_seq, task, settings, max_retries, options = args
    rng = np.random.default_rng(seed_seq)
    start = sample_quadrotor_start(rng, settings)
    problem = make_quadrotor_problem(start, settings, task)
    solver = BoxFDDPSolver(problem, options)
    model = problem.model
    T = settings['horizon']

    failures = 0
    for attempt in range(1, max_retries + 1):
        try:
            path = rrt_connect(start[:3], settings['goal'], problem.obstacles, T, rng=rng)
        except PlanningError as e:
            logger.debug("Planner failed: %s", e)
            failures += 1
            continue
        X0 = lift_path(path, model.dt, start)
        noise = rng.normal(0.0, Config.HOVER_NOISE_STD, (T - 1, 4))
        U0 = model.clamp(model.hover_thrust + noise)
        result = solver.solve(X0, U0)
        if result.converged and problem.collision_free(result.X):
            return [_record(task, start, result, model.dt, attempt)], failures
        failures += 1
    return [], failures


class DatasetService:
    """Service for generating solution datasets"""

    def __init__(self, solver_options: Optional[SolverOptions] = None, jobs: int = 1,
                 tasks: Optional[Dict[str, dict]] = None):
        self.solver_options = solver_options or SolverOptions()
        self.jobs = max(1, int(jobs))
        self.tasks = tasks or Config.TASKS
        self.skipped = 0

    def _map(self, fn, jobs_args) -> List[Tuple[List[Trajectory], int]]:
        if self.jobs > 1:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                return list(pool.map(fn, jobs_args))
        return [fn(a) for a in jobs_args]

    def _collect(self, outcomes) -> List[Trajectory]:
        trajs = []
        self.skipped = 0
        for solutions, failures in outcomes:
            trajs.extend(solutions)
            self.skipped += failures
        return trajs

    def generate_cartpole(self, sample: SampleSpec) -> List[Trajectory]:
        """
        ``sample.count`` start states with up to ``sample.per_start`` solutions each.

        Start states and control seeds come from independent child seeds of
        ``sample.seed``, so the output does not depend on the number of jobs.
        """
        settings = self.tasks['cartpole']
        children = np.random.SeedSequence(sample.seed).spawn(sample.count)
        args = [(child, settings, sample.per_start, sample.max_retries, self.solver_options)
                for child in children]
        trajs = self._collect(self._map(solve_cartpole_start, args))
        logger.info("Cartpole dataset: %d solutions from %d starts (%d failed attempts)",
                    len(trajs), sample.count, self.skipped)
        return trajs

    def generate_quadrotor(self, sample: SampleSpec) -> List[Trajectory]:
        """``sample.count`` instances, each solved from an RRT-Connect warm start"""
        settings = self.tasks[sample.task]
        children = np.random.SeedSequence(sample.seed).spawn(sample.count)
        args = [(child, sample.task, settings, sample.max_retries, self.solver_options)
                for child in children]
        trajs = self._collect(self._map(solve_quadrotor_instance, args))
        logger.info("%s dataset: %d solutions from %d instances (%d failed attempts)",
                    sample.task, len(trajs), sample.count, self.skipped)
        return trajs

    def generate(self, sample: SampleSpec) -> List[Trajectory]:
        model = self.tasks[sample.task].get('model')
        if model == 'cartpole':
            return self.generate_cartpole(sample)
        if model == 'quadrotor':
            return self.generate_quadrotor(sample)
        raise ValueError(f"Task has no dataset generator: {sample.task}")
