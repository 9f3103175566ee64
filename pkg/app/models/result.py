"""
Solver options, backward-pass terms and solve results
"""
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from config import Config


@dataclass
class SolverOptions:
    max_iter: int = Config.SOLVER_MAX_ITER
    cost_tol: float = Config.SOLVER_COST_TOL
    grad_tol: float = Config.SOLVER_GRAD_TOL
    gap_tol: float = Config.SOLVER_GAP_TOL
    reg_init: float = Config.REG_INIT
    reg_min: float = Config.REG_MIN
    reg_max: float = Config.REG_MAX
    reg_increase: float = Config.REG_INCREASE
    reg_decrease: float = Config.REG_DECREASE
    line_search_steps: int = Config.LINE_SEARCH_STEPS
    accept_ratio: float = Config.SOLVER_ACCEPT_RATIO

    def __post_init__(self):
        if self.max_iter < 0:
            raise ValueError(f"max_iter must be non-negative: {self.max_iter}")
        if self.line_search_steps < 1:
            raise ValueError("line_search_steps must be at least 1")
        if not 0 <= self.accept_ratio < 1:
            raise ValueError(f"accept_ratio must lie in [0, 1): {self.accept_ratio}")
        if self.reg_increase <= 1 or self.reg_decrease <= 1:
            raise ValueError("Regularization factors must exceed 1")

    @property
    def step_sizes(self) -> List[float]:
        return [2.0 ** -i for i in range(self.line_search_steps)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> 'SolverOptions':
        return cls(**(data or {}))


@dataclass
class BackwardPassTerms:
    """Feedforward k, feedback K and the value expansion at t=0"""
    k: np.ndarray                 # (T-1, C)
    K: np.ndarray                 # (T-1, C, M)
    Vx0: np.ndarray               # (M,)
    Vxx0: np.ndarray              # (M, M)
    expected_decrease: Tuple[float, float]
    gradient_norm: float
    free: np.ndarray              # (T-1, C) bool


@dataclass
class SolverResult:
    X: np.ndarray
    U: np.ndarray
    iterations: int
    converged: bool
    final_cost: float
    cost_trace: List[Tuple[float, float]] = field(default_factory=list)
    failure_reason: Optional[str] = None
    feasible: bool = True

    def summary(self) -> dict:
        """Deterministic subset used in dataset records"""
        return {
            'iterations': self.iterations,
            'converged': self.converged,
            'final_cost': self.final_cost,
            'failure_reason': self.failure_reason,
        }

    def __repr__(self):
        status = 'converged' if self.converged else (self.failure_reason or 'stopped')
        return f"<SolverResult {status} iterations={self.iterations} cost={self.final_cost:.6g}>"
