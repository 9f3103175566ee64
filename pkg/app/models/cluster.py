"""
Cluster model
"""
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from app.utils.errors import ArtifactError
from config import Config


@dataclass(frozen=True)
class ClusterConfig:
    """Parameters of the class-count extraction"""
    cutoff_ratio: float = Config.CUTOFF_RATIO
    min_lifetime: float = Config.MIN_LIFETIME

    def __post_init__(self):
        if not 0 < self.cutoff_ratio <= 1:
            raise ValueError(f"cutoff_ratio must lie in (0, 1]: {self.cutoff_ratio}")
        if self.min_lifetime < 0:
            raise ValueError(f"min_lifetime must be non-negative: {self.min_lifetime}")

    def to_dict(self) -> dict:
        return {'cutoff_ratio': self.cutoff_ratio, 'min_lifetime': self.min_lifetime}


class ClusterLabels:
    """Cluster index per trajectory, numbered by smallest member index"""

    def __init__(self, labels: Sequence[int], k: int):
        self.labels = np.asarray(labels, dtype=int)
        self.k = int(k)
        if self.labels.ndim != 1:
            raise ValueError("Labels must be a flat sequence")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise ValueError(f"Labels must lie in [0, {self.k})")
        if self.k < 1 or np.bincount(self.labels, minlength=self.k).min() == 0:
            raise ValueError(f"Every one of the {self.k} clusters needs a member")

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    def sizes(self) -> List[int]:
        return np.bincount(self.labels, minlength=self.k).tolist()

    def to_dict(self) -> dict:
        return {'k': self.k, 'labels': self.labels.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> 'ClusterLabels':
        try:
            return cls(data['labels'], data['k'])
        except (KeyError, TypeError) as e:
            raise ArtifactError(f"Malformed labels file: {e}") from e

    def __len__(self):
        return int(self.labels.size)

    def __repr__(self):
        return f"<ClusterLabels k={self.k} sizes={self.sizes()}>"
