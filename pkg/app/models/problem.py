"""
Obstacle model: infinite cylinders aligned with a coordinate axis
"""
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

AXES = {'x': 0, 'y': 1, 'z': 2}


@dataclass(frozen=True)
class Cylinder:
    axis: str
    center: Tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"Cylinder axis must be one of x, y, z: {self.axis}")
        if self.radius <= 0:
            raise ValueError(f"Cylinder radius must be positive: {self.radius}")
        object.__setattr__(self, 'center', tuple(float(c) for c in self.center))

    @property
    def cross_dims(self) -> Tuple[int, int]:
        """The two coordinates perpendicular to the axis"""
        a = AXES[self.axis]
        return tuple(i for i in range(3) if i != a)

    def offset(self, points: np.ndarray) -> np.ndarray:
        """Vector from the axis to each point within the cross-section plane"""
        points = np.asarray(points, dtype=float)
        return points[..., list(self.cross_dims)] - np.asarray(self.center)

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Negative inside the cylinder"""
        return np.linalg.norm(self.offset(points), axis=-1) - self.radius

    def to_dict(self) -> dict:
        return {'axis': self.axis, 'center': list(self.center), 'radius': self.radius}

    @classmethod
    def from_dict(cls, data: dict) -> 'Cylinder':
        return cls(data['axis'], tuple(data['center']), float(data['radius']))


class ObstacleSet:
    """Union of cylinders"""

    def __init__(self, cylinders: Sequence[Cylinder] = ()):
        self.cylinders: List[Cylinder] = list(cylinders)

    def signed_distance(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if not self.cylinders:
            return np.full(points.shape[:-1], np.inf)
        return np.min([c.signed_distance(points) for c in self.cylinders], axis=0)

    def is_free(self, points, clearance: float = 0.0) -> np.ndarray:
        return self.signed_distance(points) >= clearance

    def to_list(self) -> List[dict]:
        return [c.to_dict() for c in self.cylinders]

    @classmethod
    def from_list(cls, data: Sequence[dict]) -> 'ObstacleSet':
        return cls([Cylinder.from_dict(item) for item in data])

    def __len__(self):
        return len(self.cylinders)

    def __repr__(self):
        return f"<ObstacleSet cylinders={len(self.cylinders)}>"
