"""
Trajectory model and the per-task state layout
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.utils.errors import DimensionError

FILTRATION_MODES = ('full_state', 'position_only', 'pose_only')


@dataclass(frozen=True)
class StateLayout:
    """Which state dimensions hold positions, orientations and velocities.

    Dimensions listed in ``angular`` live on SO(2) and are embedded as
    (cos, sin) pairs before any distance is measured.
    """
    position: Tuple[int, ...]
    orientation: Tuple[int, ...] = ()
    velocity: Tuple[int, ...] = ()
    angular: Tuple[int, ...] = ()

    @property
    def state_dim(self) -> int:
        return len(self.position) + len(self.orientation) + len(self.velocity)

    def indices(self, mode: str) -> Tuple[int, ...]:
        if mode == 'full_state':
            dims = self.position + self.orientation + self.velocity
        elif mode == 'position_only':
            dims = self.position
        elif mode == 'pose_only':
            dims = self.position + self.orientation
        else:
            raise ValueError(f"Unknown filtration mode: {mode}")
        return tuple(sorted(dims))

    def kind(self, index: int) -> str:
        if index in self.position:
            return 'position'
        if index in self.orientation:
            return 'orientation'
        return 'velocity'

    def embedded_kinds(self, mode: str) -> List[str]:
        """Kind of every column of the embedded state, angles counted twice"""
        kinds = []
        for i in self.indices(mode):
            kinds.extend([self.kind(i)] * (2 if i in self.angular else 1))
        return kinds

    @staticmethod
    def for_task(task: Optional[str], state_dim: Optional[int] = None) -> 'StateLayout':
        if task in STATE_LAYOUTS:
            return STATE_LAYOUTS[task]
        if state_dim is None:
            raise ValueError(f"No state layout for task: {task}")
        return StateLayout(position=tuple(range(state_dim)))


STATE_LAYOUTS: Dict[str, StateLayout] = {
    'toy': StateLayout(position=(0, 1), velocity=(2, 3)),
    'cartpole': StateLayout(position=(0, 1), velocity=(2, 3), angular=(1,)),
    'quadrotor': StateLayout(position=(0, 1, 2), orientation=(3, 4, 5),
                             velocity=tuple(range(6, 12))),
}
STATE_LAYOUTS['quadrotor_single'] = STATE_LAYOUTS['quadrotor']


@dataclass(frozen=True)
class ScalingWeights:
    """Positive per-dimension weights applied after embedding"""
    w: Tuple[float, ...]

    def __post_init__(self):
        if len(self.w) == 0:
            raise ValueError("Scaling weights must not be empty")
        if any(not np.isfinite(v) or v <= 0 for v in self.w):
            raise ValueError(f"Scaling weights must be positive: {self.w}")

    @classmethod
    def of(cls, values: Sequence[float]) -> 'ScalingWeights':
        return cls(tuple(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.w, dtype=float)


@dataclass(frozen=True)
class Segment:
    """Straight piece between two consecutive knots"""
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 1 or a.shape != b.shape:
            raise DimensionError(f"Segment endpoints differ in shape: {a.shape} vs {b.shape}")
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'b', b)


@dataclass(frozen=True)
class TrajectoryShape:
    """Horizon and dimensions used to flatten trajectories into vectors"""
    horizon: int
    state_dim: int
    control_dim: int

    @property
    def size(self) -> int:
        return self.horizon * self.state_dim + (self.horizon - 1) * self.control_dim

    def flatten(self, states: np.ndarray, controls: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        controls = np.asarray(controls, dtype=float)
        if states.shape != (self.horizon, self.state_dim) or \
                controls.shape != (self.horizon - 1, self.control_dim):
            raise DimensionError(
                f"Expected states {(self.horizon, self.state_dim)} and controls "
                f"{(self.horizon - 1, self.control_dim)}, got {states.shape} and {controls.shape}")
        return np.concatenate([states.ravel(), controls.ravel()])

    def unflatten(self, vector: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.size,):
            raise DimensionError(f"Expected flat vector of size {self.size}, got {vector.shape}")
        split = self.horizon * self.state_dim
        states = vector[:split].reshape(self.horizon, self.state_dim)
        controls = vector[split:].reshape(self.horizon - 1, self.control_dim)
        return states, controls

    def to_dict(self) -> dict:
        return {'horizon': self.horizon, 'state_dim': self.state_dim,
                'control_dim': self.control_dim}


class Trajectory:
    """Knot states, the controls between them and a uniform time step"""

    def __init__(self, states, controls=None, dt: float = 1.0, meta: Optional[dict] = None):
        states = np.asarray(states, dtype=float)
        if states.ndim != 2 or states.shape[0] < 2:
            raise DimensionError(f"States must be a (T>=2, M) array, got shape {states.shape}")
        if controls is None:
            controls = np.zeros((states.shape[0] - 1, 0))
        controls = np.asarray(controls, dtype=float)
        if controls.ndim != 2 or controls.shape[0] != states.shape[0] - 1:
            raise DimensionError(
                f"Controls must have T-1={states.shape[0] - 1} rows, got shape {controls.shape}")
        if not (np.all(np.isfinite(states)) and np.all(np.isfinite(controls))):
            raise ValueError("Trajectory contains non-finite values")
        if not dt > 0:
            raise ValueError(f"Time step must be positive: {dt}")

        self.states = states
        self.controls = controls
        self.dt = float(dt)
        self.meta = dict(meta or {})

    @property
    def horizon(self) -> int:
        return self.states.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def control_dim(self) -> int:
        return self.controls.shape[1]

    @property
    def num_segments(self) -> int:
        return self.horizon - 1

    @property
    def duration(self) -> float:
        return self.dt * (self.horizon - 1)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.horizon)

    @property
    def task(self) -> Optional[str]:
        return self.meta.get('task')

    @property
    def shape(self) -> TrajectoryShape:
        return TrajectoryShape(self.horizon, self.state_dim, self.control_dim)

    def segment(self, index: int) -> Segment:
        return Segment(self.states[index], self.states[index + 1])

    def segment_endpoints(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.states[:-1], self.states[1:]

    def with_states(self, states, controls=None, dt: Optional[float] = None) -> 'Trajectory':
        return Trajectory(states,
                          self.controls if controls is None else controls,
                          self.dt if dt is None else dt,
                          self.meta)

    def to_dict(self) -> dict:
        return {
            'states': self.states.tolist(),
            'controls': self.controls.tolist(),
            'dt': self.dt,
            'meta': self.meta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'Trajectory':
        states = np.asarray(data['states'], dtype=float)
        controls = np.asarray(data.get('controls', []), dtype=float)
        if controls.size == 0:
            controls = np.zeros((states.shape[0] - 1, 0))
        return cls(states, controls, data['dt'], data.get('meta'))

    def __repr__(self):
        return (f"<Trajectory T={self.horizon} M={self.state_dim} C={self.control_dim} "
                f"dt={self.dt:g} task={self.task}>")
