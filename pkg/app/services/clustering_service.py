"""
Clustering Service
Embeds a dataset, computes its persistence and clusters the trajectories
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from app.core.clustering import ClusterManager
from app.core.geometry import GeometryManager
from app.core.persistence import PersistenceManager
from app.models.cluster import ClusterConfig, ClusterLabels
from app.models.diagram import FiltrationMatrix, PersistenceDiagram, TrajectoryDistanceMatrix
from app.models.trajectory import ScalingWeights, StateLayout, Trajectory

logger = logging.getLogger(__name__)


@dataclass
class ClusteringResult:
    labels: ClusterLabels
    diagram: PersistenceDiagram
    distances: TrajectoryDistanceMatrix
    filtration: FiltrationMatrix
    subset: List[int]

    @property
    def num_classes(self) -> int:
        return self.labels.k


class ClusteringService:
    """Service for topology-based clustering of solution datasets"""

    def __init__(self, cluster_config: Optional[ClusterConfig] = None,
                 connect_endpoints: bool = True, filtration_knots: Optional[int] = None,
                 jobs: int = 1):
        self.cluster_config = cluster_config or ClusterConfig()
        self.connect_endpoints = connect_endpoints
        self.filtration_knots = filtration_knots
        self.jobs = max(1, int(jobs))

    def prepare(self, trajs: Sequence[Trajectory], weights: Optional[ScalingWeights] = None,
                mode: str = 'full_state', layout: Optional[StateLayout] = None
                ) -> List[Trajectory]:
        """Resample (if configured) and embed every trajectory"""
        prepared = []
        for traj in trajs:
            if self.filtration_knots is not None:
                traj = GeometryManager.resample(traj, self.filtration_knots)
            prepared.append(GeometryManager.embed(traj, weights, mode, layout))
        return prepared

    def persistence(self, embedded: Sequence[Trajectory]):
        """Filtration matrix and H0/H1 diagram of already-embedded trajectories"""
        matrix = PersistenceManager.build_filtration_matrix(embedded, self.connect_endpoints)
        diagram = PersistenceManager.rips_persistence(matrix, max_dim=1)
        logger.info("Persistence over %d segments: %d H1 features, threshold %.4g",
                    matrix.size, len(diagram.in_dim(1)), diagram.threshold)
        return matrix, diagram

    def trajectory_distances(self, embedded: Sequence[Trajectory]) -> TrajectoryDistanceMatrix:
        """
        Pairwise max-of-min distances, one row block per trajectory.

        Rows are independent and run on ``jobs`` threads.
        """
        starts = np.vstack([t.states[:-1] for t in embedded])
        ends = np.vstack([t.states[1:] for t in embedded])
        counts = np.array([t.num_segments for t in embedded])
        offsets = np.r_[0, np.cumsum(counts)]
        n = len(embedded)

        def row(a: int) -> np.ndarray:
            lo, hi = offsets[a], offsets[a + 1]
            block = GeometryManager.segment_distance_matrix(starts[lo:hi], ends[lo:hi],
                                                            starts, ends)
            block[np.arange(hi - lo), np.arange(lo, hi)] = 0.0
            if self.connect_endpoints:
                block[0, offsets[:-1]] = 0.0
                block[-1, offsets[1:] - 1] = 0.0
            return ClusterManager.directed_row(block, offsets[:-1])

        if self.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                rows = list(pool.map(row, range(n)))
        else:
            rows = [row(a) for a in range(n)]
        return ClusterManager.symmetrize(np.array(rows))

    def cluster_dataset(self, trajs: Sequence[Trajectory],
                        weights: Optional[ScalingWeights] = None, mode: str = 'full_state',
                        subset: Optional[int] = None, seed: int = 0,
                        layout: Optional[StateLayout] = None) -> ClusteringResult:
        """
        Count homotopy classes and assign every trajectory to one.

        Args:
            trajs: Solution trajectories
            weights: Scaling weights of the embedded state (task default if None)
            mode: 'full_state', 'position_only' or 'pose_only'
            subset: Compute persistence on this many randomly chosen trajectories

        Returns:
            ClusteringResult with k = number of classes
        """
        if not trajs:
            raise ValueError("Cannot cluster an empty dataset")
        embedded = self.prepare(trajs, weights, mode, layout)

        chosen = list(range(len(embedded)))
        if subset is not None and subset < len(embedded):
            rng = np.random.default_rng(seed)
            chosen = sorted(rng.choice(len(embedded), size=subset, replace=False).tolist())
        matrix, diagram = self.persistence([embedded[i] for i in chosen])
        k = ClusterManager.extract_num_classes(diagram, self.cluster_config)

        distances = self.trajectory_distances(embedded)
        k = min(k, len(embedded))
        labels = ClusterManager.single_linkage(distances, k)
        logger.info("Clustered %d trajectories into %d classes, sizes %s",
                    len(embedded), k, labels.sizes())
        return ClusteringResult(labels, diagram, distances, matrix, chosen)


def cluster_dataset(trajs: Sequence[Trajectory], cfg: Optional[ClusterConfig] = None,
                    weights: Optional[ScalingWeights] = None, mode: str = 'full_state',
                    connect_endpoints: bool = True):
    """(labels, diagram, distances) with the default service settings"""
    result = ClusteringService(cfg, connect_endpoints).cluster_dataset(trajs, weights, mode)
    return result.labels, result.diagram, result.distances
