"""
Supervised warm-start dataset: start state in, flattened trajectory out
"""
from typing import Optional, Sequence

import numpy as np

from app.models.trajectory import Trajectory, TrajectoryShape
from app.utils.errors import DimensionError


class WarmStartDataset:

    def __init__(self, inputs, targets, shape: TrajectoryShape, labels=None,
                 train_idx=None, val_idx=None, test_idx=None):
        self.inputs = np.asarray(inputs, dtype=float)
        self.targets = np.asarray(targets, dtype=float)
        self.shape = shape
        n = self.inputs.shape[0]
        if self.targets.shape != (n, shape.size):
            raise DimensionError(
                f"Targets must be ({n}, {shape.size}), got {self.targets.shape}")
        self.labels = np.zeros(n, dtype=int) if labels is None else np.asarray(labels, dtype=int)
        if self.labels.shape != (n,):
            raise DimensionError(f"Expected {n} labels, got {self.labels.shape}")
        everything = np.arange(n)
        self.train_idx = everything if train_idx is None else np.asarray(train_idx, dtype=int)
        self.val_idx = np.array([], dtype=int) if val_idx is None else np.asarray(val_idx, dtype=int)
        self.test_idx = np.array([], dtype=int) if test_idx is None else np.asarray(test_idx, dtype=int)

    @classmethod
    def from_trajectories(cls, trajs: Sequence[Trajectory], labels=None, seed: int = 0,
                          val_fraction: float = 0.0, test_fraction: float = 0.0
                          ) -> 'WarmStartDataset':
        if not trajs:
            raise ValueError("Cannot build a dataset from zero trajectories")
        shape = trajs[0].shape
        inputs = np.array([t.meta.get('start', t.states[0]) for t in trajs], dtype=float)
        targets = np.array([shape.flatten(t.states, t.controls) for t in trajs])

        groups = np.zeros(len(trajs), dtype=int) if labels is None else np.asarray(labels, dtype=int)
        rng = np.random.default_rng(seed)
        splits = {'train': [], 'val': [], 'test': []}
        # split each cluster on its own; every cluster keeps a training row
        for label in np.unique(groups):
            order = rng.permutation(np.flatnonzero(groups == label))
            m = order.size
            n_test = min(int(round(test_fraction * m)), m - 1)
            n_val = min(int(round(val_fraction * m)), m - 1 - n_test)
            splits['test'].append(order[:n_test])
            splits['val'].append(order[n_test:n_test + n_val])
            splits['train'].append(order[n_test + n_val:])
        train_idx, val_idx, test_idx = (np.sort(np.concatenate(splits[name]))
                                        for name in ('train', 'val', 'test'))
        return cls(inputs, targets, shape, labels, train_idx, val_idx, test_idx)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def output_dim(self) -> int:
        return self.targets.shape[1]

    def split(self, name: str, label: Optional[int] = None):
        """(inputs, targets) of one split, optionally restricted to one cluster"""
        idx = {'train': self.train_idx, 'val': self.val_idx, 'test': self.test_idx}[name]
        if label is not None:
            idx = idx[self.labels[idx] == label]
        return self.inputs[idx], self.targets[idx]

    def __repr__(self):
        return (f"<WarmStartDataset n={len(self)} train={self.train_idx.size} "
                f"val={self.val_idx.size} test={self.test_idx.size}>")
