"""
Benchmark report model
"""
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np


@dataclass
class InstanceRecord:
    instance: int
    method: str
    converged: bool
    success: bool
    iterations: int
    final_cost: float
    collision_free: bool = True
    failure_reason: Optional[str] = None
    cost_trace: List[Tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        data = asdict(self)
        data['cost_trace'] = [list(entry) for entry in self.cost_trace]
        return data


class BenchmarkReport:
    """Per-instance outcomes for every initialization method"""

    def __init__(self, task: str, methods: List[str], config_hash: str,
                 records: Optional[List[InstanceRecord]] = None):
        self.task = task
        self.methods = list(methods)
        self.config_hash = config_hash
        self.records: List[InstanceRecord] = list(records or [])

    def add_record(self, record: InstanceRecord):
        self.records.append(record)

    @property
    def instance_count(self) -> int:
        return len({r.instance for r in self.records})

    def method_records(self, method: str) -> List[InstanceRecord]:
        return [r for r in self.records if r.method == method]

    def method_stats(self, method: str) -> Dict[str, Optional[float]]:
        """
        Success count over all instances; iteration and cost statistics over
        successful instances only (None when nothing succeeded).
        """
        records = self.method_records(method)
        wins = [r for r in records if r.success]
        stats = {
            'instances': len(records),
            'success_count': len(wins),
            'success_rate': len(wins) / len(records) if records else 0.0,
            'iterations_mean': None, 'iterations_std': None,
            'final_cost_mean': None, 'final_cost_std': None,
        }
        if wins:
            iterations = np.array([r.iterations for r in wins], dtype=float)
            costs = np.array([r.final_cost for r in wins], dtype=float)
            stats.update(iterations_mean=float(iterations.mean()),
                         iterations_std=float(iterations.std()),
                         final_cost_mean=float(costs.mean()),
                         final_cost_std=float(costs.std()))
        return stats

    def best_method(self) -> str:
        return max(self.methods, key=lambda m: self.method_stats(m)['success_count'])

    def trace_rows(self) -> List[list]:
        rows = []
        for r in self.records:
            for step, (cost, elapsed) in enumerate(r.cost_trace):
                rows.append([r.instance, r.method, step, cost, elapsed])
        return rows

    def to_dict(self) -> dict:
        return {
            'task': self.task,
            'config_hash': self.config_hash,
            'instances': self.instance_count,
            'methods': {m: self.method_stats(m) for m in self.methods},
            'records': [r.to_dict() for r in self.records],
        }

    def __repr__(self):
        rates = {m: self.method_stats(m)['success_count'] for m in self.methods}
        return f"<BenchmarkReport task={self.task} instances={self.instance_count} successes={rates}>"
