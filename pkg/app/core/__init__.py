"""
Core package initialization
"""
from app.core.geometry import GeometryManager
from app.core.persistence import PersistenceManager
from app.core.clustering import ClusterManager

__all__ = ['GeometryManager', 'PersistenceManager', 'ClusterManager']
