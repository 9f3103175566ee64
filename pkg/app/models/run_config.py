"""
Run configuration shared by every pipeline stage
"""
import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional

from app.models.cluster import ClusterConfig
from app.models.result import SolverOptions


@dataclass
class TrainingOptions:
    learning_rate: float = 1e-3
    max_epochs: int = 3000
    batch_size: int = 64
    patience: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive: {self.learning_rate}")
        if self.max_epochs < 0 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("max_epochs >= 0, batch_size >= 1 and patience >= 1 are required")


@dataclass
class SampleSpec:
    """What the dataset generator draws"""
    task: str
    count: int
    per_start: int = 1
    seed: int = 0
    max_retries: int = 20

    def __post_init__(self):
        if self.count < 1 or self.per_start < 1:
            raise ValueError("count and per_start must be at least 1")


@dataclass
class RunConfig:
    task: str
    settings: Dict[str, Any]
    output_dir: str = 'artifacts'
    seed: int = 0
    jobs: int = 1
    mode: str = 'full_state'
    weights: Optional[List[float]] = None
    connect_endpoints: bool = True
    filtration_knots: Optional[int] = None
    subset: Optional[int] = None
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    training: TrainingOptions = field(default_factory=TrainingOptions)
    expert_hidden: int = 50
    gating_hidden: int = 50
    single_hidden: Optional[int] = None
    knn_max_k: int = 10
    validation_fraction: float = 0.15
    test_fraction: float = 0.15
    count: int = 10
    per_start: int = 10
    max_retries: int = 20
    instances: int = 100
    scaling_n: List[int] = field(default_factory=lambda: [5, 10, 20])
    scaling_t: List[int] = field(default_factory=lambda: [5, 10])

    @classmethod
    def from_mapping(cls, config: Mapping[str, Any], **overrides) -> 'RunConfig':
        """Build from an upper-case config mapping; ``None`` overrides are ignored"""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        task = overrides.pop('task', config['TASK'])
        tasks = config['TASKS']
        if task not in tasks:
            raise ValueError(f"Unknown task: {task}")
        settings = dict(tasks[task])
        seed = int(overrides.pop('seed', config['SEED']))

        run = cls(
            task=task,
            settings=settings,
            output_dir=str(config['OUTPUT_DIR']),
            seed=seed,
            jobs=int(config['JOBS']),
            mode=settings.get('mode', 'full_state'),
            weights=settings.get('weights'),
            connect_endpoints=bool(settings.get('connect_endpoints', True)),
            filtration_knots=settings.get('filtration_knots'),
            cluster=ClusterConfig(config['CUTOFF_RATIO'], config['MIN_LIFETIME']),
            solver=SolverOptions(
                max_iter=config['SOLVER_MAX_ITER'], cost_tol=config['SOLVER_COST_TOL'],
                grad_tol=config['SOLVER_GRAD_TOL'], gap_tol=config['SOLVER_GAP_TOL'],
                reg_init=config['REG_INIT'], reg_min=config['REG_MIN'], reg_max=config['REG_MAX'],
                reg_increase=config['REG_INCREASE'], reg_decrease=config['REG_DECREASE'],
                line_search_steps=config['LINE_SEARCH_STEPS'],
                accept_ratio=config['SOLVER_ACCEPT_RATIO']),
            training=TrainingOptions(
                learning_rate=config['LEARNING_RATE'], max_epochs=config['MAX_EPOCHS'],
                batch_size=config['BATCH_SIZE'], patience=config['PATIENCE'], seed=seed),
            expert_hidden=config['EXPERT_HIDDEN'],
            gating_hidden=config['GATING_HIDDEN'],
            single_hidden=config['SINGLE_MLP_HIDDEN'],
            knn_max_k=config['KNN_MAX_K'],
            validation_fraction=config['VALIDATION_FRACTION'],
            test_fraction=config['TEST_FRACTION'],
            count=int(config['SAMPLE_COUNT']),
            per_start=config['SOLUTIONS_PER_START'],
            max_retries=config['MAX_RETRIES'],
            instances=config['BENCHMARK_INSTANCES'],
            scaling_n=list(config['SCALING_N']),
            scaling_t=list(config['SCALING_T']),
        )
        for key, value in overrides.items():
            if not hasattr(run, key):
                raise ValueError(f"Unknown run option: {key}")
            setattr(run, key, value)
        return run

    @property
    def sample_spec(self) -> SampleSpec:
        per_start = self.per_start if self.task == 'cartpole' else 1
        return SampleSpec(self.task, self.count, per_start, self.seed, self.max_retries)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'RunConfig':
        data = dict(data)
        data['cluster'] = ClusterConfig(**data.get('cluster', {}))
        data['solver'] = SolverOptions(**data.get('solver', {}))
        data['training'] = TrainingOptions(**data.get('training', {}))
        return cls(**data)

    def config_hash(self) -> str:
        """Stable digest of everything except output location and parallelism"""
        data = self.to_dict()
        data.pop('output_dir')
        data.pop('jobs')
        blob = json.dumps(data, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
