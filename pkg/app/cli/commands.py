"""
Pipeline commands for the Homotopy Warm-Start Engine
"""
import functools
import json
import logging
from pathlib import Path
from typing import Optional

import click
from flask import Blueprint, current_app

from app.core.clustering import ClusterManager
from app.core.persistence import PersistenceManager
from app.models.diagram import TrajectoryDistanceMatrix
from app.models.run_config import RunConfig
from app.models.trajectory import ScalingWeights, StateLayout
from app.services.benchmark_service import BenchmarkService
from app.services.clustering_service import ClusteringService
from app.services.dataset_service import DatasetService
from app.services.training_service import TrainingService, WarmStartModels
from app.utils.data_store import ArtifactStore
from app.utils.errors import TrajectoryEngineError
from simulation.toy_sine_simulation import ToySineSimulation

logger = logging.getLogger(__name__)

pipeline_bp = Blueprint('pipeline', __name__, cli_group=None)

STAGES = ('generate', 'persist', 'cluster', 'train', 'bench', 'scale')


class PipelineRunner:
    """Runs one stage against the artifacts of the previous ones"""

    def __init__(self, run: RunConfig, store: Optional[ArtifactStore] = None):
        self.run = run
        self.store = store or ArtifactStore(run.output_dir)

    @property
    def weights(self) -> Optional[ScalingWeights]:
        return ScalingWeights.of(self.run.weights) if self.run.weights else None

    @property
    def layout(self) -> StateLayout:
        return StateLayout.for_task(self.run.task)

    def clustering_service(self) -> ClusteringService:
        return ClusteringService(self.run.cluster, self.run.connect_endpoints,
                                 self.run.filtration_knots, self.run.jobs)

    def generate(self) -> dict:
        service = DatasetService(self.run.solver, self.run.jobs,
                                 {self.run.task: self.run.settings})
        trajs = service.generate(self.run.sample_spec)
        if not trajs:
            raise TrajectoryEngineError("No instance converged; dataset would be empty")
        self.store.write_dataset(trajs)
        written = self.store.read_dataset()
        return {'trajectories': len(written), 'failed_attempts': service.skipped}

    def persist(self) -> dict:
        trajs = self.store.read_dataset()
        service = self.clustering_service()
        embedded = service.prepare(trajs, self.weights, self.run.mode, self.layout)
        if self.run.subset is not None and self.run.subset < len(embedded):
            embedded = embedded[:self.run.subset]
        matrix, diagram = service.persistence(embedded)
        self.store.write_matrix(matrix, ArtifactStore.FILTRATION)
        self.store.write_diagram(diagram)
        self.store.read_diagram()
        return {
            'segments': matrix.size,
            'h1_features': len(diagram.in_dim(1)),
            'num_classes': ClusterManager.extract_num_classes(diagram, self.run.cluster),
            'separating_distance': PersistenceManager.separating_distance(diagram, self.run.cluster),
            'threshold': diagram.threshold,
        }

    def cluster(self) -> dict:
        trajs = self.store.read_dataset()
        result = self.clustering_service().cluster_dataset(
            trajs, self.weights, self.run.mode, self.run.subset, self.run.seed, self.layout)
        self.store.write_labels(result.labels)
        self.store.write_matrix(result.distances, ArtifactStore.TRAJECTORY_DISTANCES)
        self.store.write_diagram(result.diagram)
        self.store.read_labels()
        self.store.read_matrix(ArtifactStore.TRAJECTORY_DISTANCES, TrajectoryDistanceMatrix)
        return {'k': result.num_classes, 'sizes': result.labels.sizes()}

    def train(self) -> dict:
        trajs = self.store.read_dataset()
        labels = self.store.read_labels()
        service = TrainingService(self.run.training, self.run.expert_hidden,
                                  self.run.gating_hidden, self.run.single_hidden,
                                  self.run.knn_max_k, self.run.validation_fraction,
                                  self.run.test_fraction)
        dataset = service.build_dataset(trajs, labels)
        models = service.train_all(dataset, labels.k)
        for name, model in models.items():
            self.store.write_model(name, model)
            self.store.read_model(name)
        return {'mlp_parameters': models.mlp.parameter_count(), 'knn_k': models.knn.k,
                'moe_parameters': models.moe.parameter_count(), 'k': labels.k}

    def load_models(self) -> WarmStartModels:
        return WarmStartModels(self.store.read_model('mlp'), self.store.read_model('knn'),
                               self.store.read_model('moe'))

    def bench(self) -> dict:
        models = self.load_models()
        service = BenchmarkService(self.run.task, self.run.solver, self.run.jobs,
                                   self.run.settings)
        report = service.run_benchmark(models, self.run.instances, self.run.seed,
                                       self.run.config_hash())
        self.store.write_json(ArtifactStore.REPORT, report.to_dict())
        self.store.write_csv(ArtifactStore.REPORT_TRACES,
                             ['instance', 'method', 'step', 'cost', 'seconds'],
                             report.trace_rows())
        self.store.read_json(ArtifactStore.REPORT)
        return {m: report.method_stats(m)['success_count'] for m in report.methods}

    def scale(self) -> dict:
        trajs = self.store.read_dataset()
        service = BenchmarkService(self.run.task, self.run.solver, self.run.jobs,
                                   self.run.settings)
        rows = service.scalability_study(trajs, self.run.scaling_n, self.run.scaling_t,
                                         self.weights, self.run.mode,
                                         self.run.connect_endpoints, self.layout)
        self.store.write_csv(ArtifactStore.SCALING,
                             ['trajectories', 'knots', 'segments', 'seconds', 'embedded_dim'],
                             [[r.trajectories, r.knots, r.segments, r.seconds, r.embedded_dim]
                              for r in rows])
        summary = {'rows': len(rows)}
        try:
            summary['exponent'], summary['r_squared'] = BenchmarkService.fit_power_law(rows)
        except ValueError as e:
            logger.warning("No power-law fit: %s", e)
        return summary

    def run_stage(self, stage: str) -> dict:
        if stage not in STAGES:
            raise ValueError(f"Unknown stage: {stage}")
        logger.info("Running stage %s for task %s into %s", stage, self.run.task,
                    self.store.root)
        return getattr(self, stage)()


def cmd_pipeline(stage: str, run: RunConfig) -> dict:
    return PipelineRunner(run).run_stage(stage)


def _run_config(config_path, seed, out, jobs, task, verbose, **overrides) -> RunConfig:
    if config_path:
        suffix = Path(config_path).suffix.lower()
        if suffix == '.toml':
            import tomllib
            current_app.config.from_file(config_path, load=tomllib.load, text=False)
        else:
            current_app.config.from_file(config_path, load=json.load)
    if verbose:
        logging.getLogger('app').setLevel(logging.DEBUG)
    if out is not None:
        current_app.config['OUTPUT_DIR'] = out
    if jobs is not None:
        current_app.config['JOBS'] = jobs
    try:
        return RunConfig.from_mapping(current_app.config, task=task, seed=seed, **overrides)
    except ValueError as e:
        raise click.UsageError(str(e)) from e


def common_options(fn):
    """--config, --seed, --out, --jobs, --task and --verbose for every stage"""
    @click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
                  help='TOML or JSON file with upper-case settings')
    @click.option('--seed', type=int, help='Random seed')
    @click.option('--out', type=click.Path(file_okay=False), help='Artifact directory')
    @click.option('--jobs', type=click.IntRange(min=1), help='Parallel workers')
    @click.option('--task', type=str, help='cartpole, quadrotor, quadrotor_single or toy')
    @click.option('--verbose', is_flag=True, help='Debug logging')
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        return fn(*args, **kwargs)
    return wrapper


def _execute(stage: str, run: RunConfig):
    try:
        summary = PipelineRunner(run).run_stage(stage)
    except (TrajectoryEngineError, ValueError, OSError) as e:
        raise click.ClickException(str(e)) from e
    click.echo(json.dumps({'stage': stage, 'task': run.task, **summary}, indent=2, default=str))


@pipeline_bp.cli.command('toy')
@common_options
def toy_command(config_path, seed, out, jobs, task, verbose):
    """Persistence of the touching and crossing sine pairs."""
    run = _run_config(config_path, seed, out, jobs, 'toy', verbose)
    simulation = ToySineSimulation(run.settings, run.cluster, verbose=False)
    try:
        verdicts = simulation.run()
        store = ArtifactStore(run.output_dir)
        for label, diagram in simulation.diagrams.items():
            store.write_diagram(diagram, f"toy_{label}_diagram.json")
        store.write_json('toy_verdicts.json', verdicts)
    except (TrajectoryEngineError, ValueError, OSError) as e:
        raise click.ClickException(str(e)) from e
    for label, verdict in verdicts.items():
        click.echo(f"{label}: {verdict['h1_retained']} retained H1 features, "
                   f"separating distance {verdict['separating_distance']:.4f}")


@pipeline_bp.cli.command('generate')
@common_options
@click.option('--count', type=click.IntRange(min=1), help='Start states / instances')
@click.option('--per-start', type=click.IntRange(min=1), help='Solutions per cartpole start')
def generate_command(config_path, seed, out, jobs, task, verbose, count, per_start):
    """Solve randomized instances and write the dataset."""
    _execute('generate', _run_config(config_path, seed, out, jobs, task, verbose,
                                     count=count, per_start=per_start))


@pipeline_bp.cli.command('persist')
@common_options
@click.option('--mode', type=click.Choice(['full_state', 'position_only', 'pose_only']))
@click.option('--subset', type=click.IntRange(min=1), help='Use the first N trajectories')
@click.option('--knots', 'filtration_knots', type=click.IntRange(min=2),
              help='Resample trajectories to this many knots first')
def persist_command(config_path, seed, out, jobs, task, verbose, mode, subset,
                    filtration_knots):
    """Build the filtration matrix and its persistence diagram."""
    _execute('persist', _run_config(config_path, seed, out, jobs, task, verbose, mode=mode,
                                    subset=subset, filtration_knots=filtration_knots))


@pipeline_bp.cli.command('cluster')
@common_options
@click.option('--mode', type=click.Choice(['full_state', 'position_only', 'pose_only']))
@click.option('--subset', type=click.IntRange(min=1),
              help='Persistence on a random subset of N trajectories')
@click.option('--knots', 'filtration_knots', type=click.IntRange(min=2))
def cluster_command(config_path, seed, out, jobs, task, verbose, mode, subset,
                    filtration_knots):
    """Count homotopy classes and label every trajectory."""
    _execute('cluster', _run_config(config_path, seed, out, jobs, task, verbose, mode=mode,
                                    subset=subset, filtration_knots=filtration_knots))


@pipeline_bp.cli.command('train')
@common_options
def train_command(config_path, seed, out, jobs, task, verbose):
    """Train the MLP, KNN and mixture-of-experts warm-start models."""
    _execute('train', _run_config(config_path, seed, out, jobs, task, verbose))


@pipeline_bp.cli.command('bench')
@common_options
@click.option('--instances', type=click.IntRange(min=1), help='Fresh problem instances')
def bench_command(config_path, seed, out, jobs, task, verbose, instances):
    """Compare cold start, MLP, KNN and MoE warm starts."""
    _execute('bench', _run_config(config_path, seed, out, jobs, task, verbose,
                                  instances=instances))


@pipeline_bp.cli.command('scale')
@common_options
@click.option('--n', 'scaling_n', multiple=True, type=click.IntRange(min=1),
              help='Dataset sizes (repeatable)')
@click.option('--t', 'scaling_t', multiple=True, type=click.IntRange(min=2),
              help='Filtration knots (repeatable)')
def scale_command(config_path, seed, out, jobs, task, verbose, scaling_n, scaling_t):
    """Time the filtration for growing datasets and fit a power law."""
    _execute('scale', _run_config(config_path, seed, out, jobs, task, verbose,
                                  scaling_n=list(scaling_n) or None,
                                  scaling_t=list(scaling_t) or None))
