"""
Cluster Manager
Counts homotopy classes from a diagram and clusters trajectories by single linkage
"""
import logging
import math
from typing import List, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from app.models.cluster import ClusterConfig, ClusterLabels
from app.models.diagram import (FiltrationMatrix, PersistenceDiagram, PersistenceFeature,
                                TrajectoryDistanceMatrix)
from app.models.trajectory import Trajectory

logger = logging.getLogger(__name__)


class ClusterManager:
    """Class-count extraction and trajectory clustering"""

    @staticmethod
    def extract_num_classes(diagram: PersistenceDiagram, cfg: ClusterConfig = None) -> int:
        """
        Number of homotopy classes implied by the H1 lifetimes.

        Walks the lifetimes longest first and stops at the first one that
        drops below ``min_lifetime`` or below ``cutoff_ratio`` times its
        predecessor. Each retained hole adds one class.
        """
        cfg = cfg or ClusterConfig()
        num_classes = 1
        previous = math.inf
        for lifetime in diagram.lifetimes(1):
            if lifetime < cfg.min_lifetime or lifetime < cfg.cutoff_ratio * previous:
                break
            num_classes += 1
            previous = lifetime
        return num_classes

    @staticmethod
    def split_h1_features(diagram: PersistenceDiagram, cfg: ClusterConfig = None
                          ) -> Tuple[List[PersistenceFeature], List[PersistenceFeature]]:
        """(retained, discarded) H1 features under the class-count rule"""
        retained_count = ClusterManager.extract_num_classes(diagram, cfg) - 1
        ranked = sorted(diagram.in_dim(1), key=lambda f: f.lifetime, reverse=True)
        return ranked[:retained_count], ranked[retained_count:]

    @staticmethod
    def directed_distance(block: np.ndarray) -> float:
        """max over rows of the row minimum"""
        return float(block.min(axis=1).max())

    @staticmethod
    def pairwise_trajectory_distance(t1: Trajectory, t2: Trajectory,
                                     connect_endpoints: bool = True) -> float:
        """
        Symmetrized max-of-min segment distance between two trajectories.

        Uses the same endpoint connection as the dataset filtration.
        """
        from app.core.persistence import PersistenceManager

        m = PersistenceManager.build_filtration_matrix([t1, t2], connect_endpoints)
        n1 = t1.num_segments
        block = m.d[:n1, n1:]
        return max(ClusterManager.directed_distance(block),
                   ClusterManager.directed_distance(block.T))

    @staticmethod
    def trajectory_distances(matrix: FiltrationMatrix) -> TrajectoryDistanceMatrix:
        """All pairwise trajectory distances from the cross blocks of a filtration matrix"""
        offsets = matrix.trajectory_offsets()
        n = offsets.shape[0] - 1
        directed = np.zeros((n, n))
        for a in range(n):
            rows = matrix.d[offsets[a]:offsets[a + 1]]
            directed[a] = ClusterManager.directed_row(rows, offsets[:-1])
        return ClusterManager.symmetrize(directed)

    @staticmethod
    def directed_row(rows: np.ndarray, column_offsets: np.ndarray) -> np.ndarray:
        """Directed distances from one trajectory's segment rows to every trajectory"""
        return np.minimum.reduceat(rows, column_offsets, axis=1).max(axis=0)

    @staticmethod
    def symmetrize(directed: np.ndarray) -> TrajectoryDistanceMatrix:
        d = np.maximum(directed, directed.T)
        np.fill_diagonal(d, 0.0)
        return TrajectoryDistanceMatrix(d, validate=False)

    @staticmethod
    def single_linkage(matrix: TrajectoryDistanceMatrix, k: int) -> ClusterLabels:
        """
        Single-linkage clustering stopped at ``k`` clusters.

        Merges follow edges in (distance, i, j) order. Labels are numbered
        by each cluster's smallest member index.
        """
        d = matrix.d
        n = d.shape[0]
        if not 1 <= k <= n:
            raise ValueError(f"k must lie in [1, {n}], got {k}")

        iu, ju = np.triu_indices(n, k=1)
        order = np.lexsort((ju, iu, d[iu, ju]))
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        rows, cols = [], []
        for e in order:
            if len(rows) == n - k:
                break
            i, j = int(iu[e]), int(ju[e])
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
                rows.append(i)
                cols.append(j)

        graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        _, components = connected_components(graph, directed=False)

        relabel = {}
        for c in components:
            relabel.setdefault(int(c), len(relabel))
        labels = np.array([relabel[int(c)] for c in components], dtype=int)
        logger.debug("Single linkage: %d trajectories into %d clusters", n, k)
        return ClusterLabels(labels, k)

    @staticmethod
    def swing_direction(traj: Trajectory, angle_index: int = 1) -> int:
        """+1 when the pole swings up counterclockwise, -1 otherwise"""
        angles = np.unwrap(traj.states[:, angle_index])
        return 1 if angles[-1] - angles[0] >= 0 else -1

    @staticmethod
    def winding_side(traj: Trajectory, axis_dims: Sequence[int] = (0, 1),
                     center: Sequence[float] = (0.0, 0.0)) -> int:
        """Sign of the net angle swept around an axis in the (axis_dims) plane"""
        q = traj.states[:, list(axis_dims)] - np.asarray(center)
        angles = np.unwrap(np.arctan2(q[:, 1], q[:, 0]))
        return 1 if angles[-1] - angles[0] >= 0 else -1

    @staticmethod
    def agreement(labels: ClusterLabels, reference: Sequence[int]) -> float:
        """Fraction of trajectories whose cluster agrees with the majority reference class"""
        reference = np.asarray(reference)
        agree = 0
        for cluster in range(labels.k):
            members = reference[labels.members(cluster)]
            if members.size:
                _, counts = np.unique(members, return_counts=True)
                agree += int(counts.max())
        return agree / max(len(labels), 1)
