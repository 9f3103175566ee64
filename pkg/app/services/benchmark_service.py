"""
Benchmark Service
Compares warm-start methods on fresh problem instances and times the filtration
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from app.core.ocp import OCProblem, make_task_problem
from app.core.solver import BoxFDDPSolver
from app.models.report import BenchmarkReport, InstanceRecord
from app.models.result import SolverOptions
from app.models.trajectory import ScalingWeights, StateLayout, Trajectory
from app.services.clustering_service import ClusteringService
from app.services.dataset_service import sample_cartpole_start, sample_quadrotor_start
from app.services.training_service import WarmStartModels
from config import Config

logger = logging.getLogger(__name__)

METHODS = ('cold_start', 'mlp', 'knn', 'moe')


def cold_start(problem: OCProblem) -> Tuple[np.ndarray, np.ndarray]:
    """Initial state repeated, neutral control (hover thrust for the quadrotor)"""
    X = np.tile(problem.x0, (problem.horizon, 1))
    U = np.tile(problem.model.neutral_control(), (problem.horizon - 1, 1))
    return X, U


def warm_starts(problem: OCProblem, models: Optional[WarmStartModels]
                ) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    starts = {'cold_start': cold_start(problem)}
    if models is None:
        return starts
    shape = models.moe.shape
    for name, model in models.items():
        X, U = shape.unflatten(model.predict(problem.x0[None])[0])
        starts[name] = (X, problem.model.clamp(U))
    return starts


def run_instance(args) -> List[InstanceRecord]:
    """Solve one instance from every method's warm start"""
    index, seed_seq, task, settings, models, options = args
    rng = np.random.default_rng(seed_seq)
    if settings['model'] == 'cartpole':
        x0 = sample_cartpole_start(rng, settings)
    else:
        x0 = sample_quadrotor_start(rng, settings)
    problem = make_task_problem(task, x0, settings)
    solver = BoxFDDPSolver(problem, options)

    records = []
    for method, (X, U) in warm_starts(problem, models).items():
        result = solver.solve(X, U)
        collision_free = problem.collision_free(result.X)
        success = bool(result.converged and result.final_cost < problem.success_cost
                       and collision_free)
        records.append(InstanceRecord(index, method, result.converged, success,
                                      result.iterations, result.final_cost, collision_free,
                                      result.failure_reason, result.cost_trace))
    return records


@dataclass
class ScalingRow:
    trajectories: int
    knots: int
    segments: int
    seconds: float
    embedded_dim: int = 0


class BenchmarkService:
    """Service for solver benchmarks and filtration timing"""

    def __init__(self, task: str, solver_options: Optional[SolverOptions] = None,
                 jobs: int = 1, settings: Optional[dict] = None):
        self.task = task
        self.settings = settings or Config.TASKS[task]
        self.solver_options = solver_options or SolverOptions()
        self.jobs = max(1, int(jobs))

    def run_benchmark(self, models: Optional[WarmStartModels], n_instances: int, seed: int,
                      config_hash: str = '') -> BenchmarkReport:
        """
        Solve ``n_instances`` fresh start states with every initialization.

        Success means converged, final cost under the task threshold and no
        collision along the solution.
        """
        if n_instances < 1:
            raise ValueError("n_instances must be at least 1")
        methods = list(METHODS) if models is not None else ['cold_start']
        children = np.random.SeedSequence([seed, 1]).spawn(n_instances)
        args = [(i, child, self.task, self.settings, models, self.solver_options)
                for i, child in enumerate(children)]
        if self.jobs > 1:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                outcomes = list(pool.map(run_instance, args))
        else:
            outcomes = [run_instance(a) for a in args]

        report = BenchmarkReport(self.task, methods, config_hash)
        for records in outcomes:
            for record in records:
                report.add_record(record)
        for method in methods:
            stats = report.method_stats(method)
            logger.info("%-10s success %d/%d, iterations %s +- %s", method,
                        stats['success_count'], stats['instances'],
                        stats['iterations_mean'], stats['iterations_std'])
        return report

    def scalability_study(self, trajs: Sequence[Trajectory], n_values: Sequence[int],
                          knot_values: Sequence[int], weights: Optional[ScalingWeights] = None,
                          mode: str = 'full_state', connect_endpoints: bool = True,
                          layout: Optional[StateLayout] = None) -> List[ScalingRow]:
        """Wall-clock time of filtration plus persistence for each (N, knots) pair"""
        rows = []
        for knots in knot_values:
            service = ClusteringService(connect_endpoints=connect_endpoints,
                                        filtration_knots=knots)
            for n in n_values:
                if n > len(trajs):
                    logger.warning("Skipping N=%d: dataset holds %d trajectories", n, len(trajs))
                    continue
                embedded = service.prepare(trajs[:n], weights, mode, layout)
                started = time.perf_counter()
                service.persistence(embedded)
                elapsed = time.perf_counter() - started
                rows.append(ScalingRow(n, knots, n * (knots - 1), elapsed,
                                       embedded[0].state_dim))
                logger.info("N=%d knots=%d: %.3fs", n, knots, elapsed)
        return rows

    @staticmethod
    def fit_power_law(rows: Sequence[ScalingRow]) -> Tuple[float, float]:
        """(exponent, r^2) of seconds ~ segments^exponent"""
        usable = [r for r in rows if r.seconds > 0 and r.segments > 1]
        if len({r.segments for r in usable}) < 2:
            raise ValueError("Need at least two distinct segment counts to fit a power law")
        fit = linregress(np.log([r.segments for r in usable]), np.log([r.seconds for r in usable]))
        return float(fit.slope), float(fit.rvalue ** 2)
