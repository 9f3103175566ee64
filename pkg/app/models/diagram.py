"""
Distance matrices and persistence diagrams
"""
import math
import struct
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.utils.errors import ArtifactError, DimensionError

MATRIX_MAGIC = b'TWFM'


class DistanceMatrix:
    """Symmetric, non-negative matrix with a zero diagonal"""

    def __init__(self, d, validate: bool = True):
        self.d = np.asarray(d, dtype=float)
        if validate:
            self.validate()

    @property
    def size(self) -> int:
        return self.d.shape[0]

    def validate(self):
        d = self.d
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DimensionError(f"Distance matrix must be square, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("Distance matrix contains non-finite entries")
        if np.any(d < 0):
            raise ValueError("Distance matrix contains negative entries")
        scale = max(1.0, float(np.max(d))) if d.size else 1.0
        if d.size and np.max(np.abs(d - d.T)) > 1e-12 * scale:
            raise ValueError("Distance matrix is not symmetric")
        if d.size and np.any(np.diag(d) != 0):
            raise ValueError("Distance matrix diagonal must be zero")

    def to_bytes(self) -> bytes:
        """TWFM layout: magic, u32 side length, little-endian float64 rows"""
        header = MATRIX_MAGIC + struct.pack('<I', self.size)
        return header + np.ascontiguousarray(self.d, dtype='<f8').tobytes()

    @staticmethod
    def parse_bytes(blob: bytes) -> np.ndarray:
        if len(blob) < 8 or blob[:4] != MATRIX_MAGIC:
            raise ArtifactError("Not a TWFM matrix file")
        (n,) = struct.unpack('<I', blob[4:8])
        body = blob[8:]
        if len(body) != 8 * n * n:
            raise ArtifactError(f"TWFM body holds {len(body)} bytes, expected {8 * n * n}")
        return np.frombuffer(body, dtype='<f8').reshape(n, n).astype(float)

    @classmethod
    def from_bytes(cls, blob: bytes):
        return cls(cls.parse_bytes(blob))

    def __repr__(self):
        return f"<{type(self).__name__} n={self.size}>"


class FiltrationMatrix(DistanceMatrix):
    """Segment-to-segment distances over a whole dataset.

    ``index_map[r]`` is the (trajectory, segment) pair behind row r.
    """

    def __init__(self, d, index_map: Optional[Sequence[Tuple[int, int]]] = None,
                 validate: bool = True):
        super().__init__(d, validate)
        self.index_map = [tuple(pair) for pair in index_map] if index_map is not None else []
        if self.index_map and len(self.index_map) != self.size:
            raise DimensionError(
                f"Index map has {len(self.index_map)} entries for a matrix of side {self.size}")

    def trajectory_offsets(self) -> np.ndarray:
        """Row offset of the first segment of each trajectory, plus the total"""
        if not self.index_map:
            raise ValueError("Filtration matrix has no index map")
        traj_ids = np.array([t for t, _ in self.index_map])
        starts = np.flatnonzero(np.r_[True, traj_ids[1:] != traj_ids[:-1]])
        return np.r_[starts, len(traj_ids)]


class TrajectoryDistanceMatrix(DistanceMatrix):
    """Max-of-min segment distances between whole trajectories"""


@dataclass(frozen=True)
class PersistenceFeature:
    dim: int
    birth: float
    death: float

    @property
    def lifetime(self) -> float:
        return self.death - self.birth

    @property
    def is_essential(self) -> bool:
        return math.isinf(self.death)

    def to_dict(self) -> dict:
        return {'dim': self.dim, 'birth': self.birth,
                'death': None if self.is_essential else self.death}

    @classmethod
    def from_dict(cls, data: dict) -> 'PersistenceFeature':
        death = data.get('death')
        return cls(int(data['dim']), float(data['birth']),
                   math.inf if death is None else float(death))


class PersistenceDiagram:
    """Multiset of (dim, birth, death) features and the threshold they were computed at"""

    def __init__(self, features: Sequence[PersistenceFeature], threshold: float = math.inf):
        self.features: List[PersistenceFeature] = sorted(
            features, key=lambda f: (f.dim, f.birth, f.death))
        self.threshold = float(threshold)

    def in_dim(self, dim: int) -> List[PersistenceFeature]:
        return [f for f in self.features if f.dim == dim]

    def lifetimes(self, dim: int) -> List[float]:
        """Lifetimes of dimension ``dim``, longest first"""
        return sorted((f.lifetime for f in self.in_dim(dim)), reverse=True)

    def essential_count(self, dim: int) -> int:
        return sum(1 for f in self.in_dim(dim) if f.is_essential)

    def to_list(self) -> List[dict]:
        return [f.to_dict() for f in self.features]

    @classmethod
    def from_list(cls, data: Sequence[dict], threshold: float = math.inf) -> 'PersistenceDiagram':
        try:
            return cls([PersistenceFeature.from_dict(item) for item in data], threshold)
        except (KeyError, TypeError, ValueError) as e:
            raise ArtifactError(f"Malformed persistence diagram: {e}") from e

    def __len__(self):
        return len(self.features)

    def __repr__(self):
        return (f"<PersistenceDiagram H0={len(self.in_dim(0))} H1={len(self.in_dim(1))} "
                f"threshold={self.threshold:g}>")
