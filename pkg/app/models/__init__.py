"""
Models package initialization
"""
from app.models.trajectory import ScalingWeights, Segment, StateLayout, Trajectory, TrajectoryShape
from app.models.diagram import (FiltrationMatrix, PersistenceDiagram, PersistenceFeature,
                                TrajectoryDistanceMatrix)
from app.models.cluster import ClusterConfig, ClusterLabels
from app.models.problem import Cylinder, ObstacleSet

__all__ = ['ScalingWeights', 'Segment', 'StateLayout', 'Trajectory', 'TrajectoryShape',
           'FiltrationMatrix', 'PersistenceDiagram', 'PersistenceFeature',
           'TrajectoryDistanceMatrix', 'ClusterConfig', 'ClusterLabels', 'Cylinder',
           'ObstacleSet']
