"""
Persistence Manager
Builds segment filtrations and computes Vietoris-Rips persistence in H0 and H1
"""
import logging
import math
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from app.core.clustering import ClusterManager
from app.core.geometry import GeometryManager
from app.models.cluster import ClusterConfig
from app.models.diagram import (DistanceMatrix, FiltrationMatrix, PersistenceDiagram,
                                PersistenceFeature)
from app.models.trajectory import Trajectory
from app.utils.errors import DimensionError
from config import Config

logger = logging.getLogger(__name__)


class PersistenceManager:
    """Filtration construction and Rips persistence"""

    @staticmethod
    def build_filtration_matrix(trajs: Sequence[Trajectory], connect_endpoints: bool = True,
                                block_rows: int = Config.DISTANCE_BLOCK_ROWS) -> FiltrationMatrix:
        """
        Segment distance matrix over every segment of every trajectory.

        Consecutive segments of one trajectory are at distance 0. With
        ``connect_endpoints`` all first segments are mutually at 0, and so
        are all last segments.

        Args:
            trajs: Trajectories already embedded into the filtration space
            connect_endpoints: Glue starts together and ends together

        Returns:
            FiltrationMatrix with its (trajectory, segment) index map
        """
        if not trajs:
            raise ValueError("Cannot build a filtration from an empty dataset")
        dim = trajs[0].state_dim
        for t in trajs:
            if t.state_dim != dim:
                raise DimensionError(f"Trajectory dimension {t.state_dim} differs from {dim}")

        starts = np.vstack([t.states[:-1] for t in trajs])
        ends = np.vstack([t.states[1:] for t in trajs])
        index_map = [(ti, si) for ti, t in enumerate(trajs) for si in range(t.num_segments)]

        d = GeometryManager.segment_distance_matrix(starts, ends, starts, ends, block_rows)
        d = np.minimum(d, d.T)
        np.fill_diagonal(d, 0.0)

        counts = np.array([t.num_segments for t in trajs])
        offsets = np.r_[0, np.cumsum(counts)[:-1]]
        for offset, count in zip(offsets, counts):
            rows = np.arange(offset, offset + count - 1)
            d[rows, rows + 1] = 0.0
            d[rows + 1, rows] = 0.0
        if connect_endpoints:
            firsts = offsets
            lasts = offsets + counts - 1
            d[np.ix_(firsts, firsts)] = 0.0
            d[np.ix_(lasts, lasts)] = 0.0

        logger.debug("Filtration matrix over %d segments from %d trajectories",
                     d.shape[0], len(trajs))
        return FiltrationMatrix(d, index_map, validate=False)

    @staticmethod
    def enclosing_radius(d: np.ndarray) -> float:
        """Smallest radius past which the Rips complex is a cone"""
        if d.shape[0] == 0:
            return 0.0
        return float(np.min(np.max(d, axis=1)))

    @staticmethod
    def rips_persistence(matrix: Union[DistanceMatrix, np.ndarray], max_dim: int = 1,
                         threshold: Union[str, float] = 'auto') -> PersistenceDiagram:
        """
        Vietoris-Rips persistence of a distance matrix in dimensions 0..max_dim.

        H0 comes from Kruskal's algorithm; H1 from a cohomology reduction
        with clearing. Features shorter than MIN_FEATURE_LIFETIME are dropped.

        Args:
            matrix: Symmetric non-negative matrix with zero diagonal
            max_dim: 0 or 1
            threshold: 'auto' (enclosing radius) or a float

        Returns:
            PersistenceDiagram recording the threshold used
        """
        if max_dim not in (0, 1):
            raise ValueError(f"max_dim must be 0 or 1, got {max_dim}")
        if isinstance(matrix, DistanceMatrix):
            matrix.validate()
            d = matrix.d
        else:
            d = DistanceMatrix(matrix).d
        d = 0.5 * (d + d.T)
        n = d.shape[0]

        thr = PersistenceManager.enclosing_radius(d) if threshold == 'auto' else float(threshold)
        if thr < 0:
            raise ValueError(f"Threshold must be non-negative: {thr}")

        iu, ju = np.triu_indices(n, k=1)
        w = d[iu, ju]
        keep = w <= thr
        iu, ju, w = iu[keep], ju[keep], w[keep]
        order = np.lexsort((ju, iu, w))
        iu, ju, w = iu[order], ju[order], w[order]

        features: List[PersistenceFeature] = []
        death_edge = _kruskal_deaths(n, iu, ju)
        for e in np.flatnonzero(death_edge):
            features.append(PersistenceFeature(0, 0.0, float(w[e])))
        components = n - int(death_edge.sum())
        features.extend(PersistenceFeature(0, 0.0, math.inf) for _ in range(components))

        if max_dim >= 1:
            reducer = _CoboundaryReducer(d, thr)
            for e in np.flatnonzero(~death_edge)[::-1]:
                birth = float(w[e])
                death = reducer.reduce(int(iu[e]), int(ju[e]), birth)
                if death - birth >= Config.MIN_FEATURE_LIFETIME:
                    features.append(PersistenceFeature(1, birth, death))
            logger.debug("H1 reduction: %d raw and %d reduced pivot columns",
                         len(reducer.unreduced), len(reducer.reduced))

        features = [f for f in features if f.lifetime >= Config.MIN_FEATURE_LIFETIME]
        diagram = PersistenceDiagram(features, thr)
        logger.debug("Rips persistence on %d points at threshold %.6g: %r", n, thr, diagram)
        return diagram

    @staticmethod
    def separating_distance(diagram: PersistenceDiagram, cfg: ClusterConfig = None) -> float:
        """
        Scale between the discarded and the retained H1 features.

        Midpoint of the last discarded death and the first retained birth,
        or of the first retained death when the births overlap.
        """
        retained, discarded = ClusterManager.split_h1_features(diagram, cfg or ClusterConfig())
        if not retained:
            return diagram.threshold
        lo = max((f.death for f in discarded if not f.is_essential), default=0.0)
        births = min(f.birth for f in retained)
        hi = births if births > lo else min(f.death for f in retained)
        if math.isinf(hi):
            hi = diagram.threshold
        return 0.5 * (lo + hi)


def _kruskal_deaths(n: int, iu: np.ndarray, ju: np.ndarray) -> np.ndarray:
    """Mark the edges that merge two components, in filtration order"""
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    merges = np.zeros(iu.shape[0], dtype=bool)
    for e in range(iu.shape[0]):
        ri, rj = find(int(iu[e])), find(int(ju[e]))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
            merges[e] = True
    return merges


class _CoboundaryReducer:
    """
    Column reduction of the edge-to-triangle coboundary matrix.

    Triangles are keyed by a*n^2 + b*n + c for sorted vertices a < b < c and
    ordered by (diameter, key); edges are ordered by (diameter, i, j). Columns
    are processed in reverse filtration order. A column whose oldest cofacet
    has the edge as its youngest facet is an apparent pair and is paired
    without building its coboundary. A pivot whose column needed no
    reduction is stored as its edge and expanded on the first collision;
    reduced columns are cached as (keys, diameters).
    """

    def __init__(self, d: np.ndarray, threshold: float):
        self.d = d
        self.n = d.shape[0]
        self.threshold = threshold
        self.d_in = np.where(d <= threshold, d, np.inf)
        self.unreduced: Dict[int, Tuple[int, int, float]] = {}
        self.reduced: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    def cofacet_diameters(self, i: int, j: int, diam: float) -> np.ndarray:
        """Diameter of triangle (i, j, k) for every k; inf where it is not in the complex"""
        row = np.maximum(self.d_in[i], self.d_in[j])
        row[i] = np.inf
        row[j] = np.inf
        return np.maximum(row, diam, out=row)

    def key(self, i: int, j: int, k: int) -> int:
        a, c = min(i, k), max(j, k)
        return (a * self.n + (i + j + k - a - c)) * self.n + c

    def coboundary(self, i: int, j: int, diam: float):
        row = self.cofacet_diameters(i, j, diam)
        ks = np.flatnonzero(np.isfinite(row))
        a = np.minimum(ks, i)
        c = np.maximum(ks, j)
        b = i + j + ks - a - c
        keys = (a * self.n + b) * self.n + c
        return keys.astype(np.int64), row[ks]

    def youngest_facet(self, i: int, j: int, diam: float, k: int) -> bool:
        """True when (i, j) comes after (i, k) and (j, k) in the edge order"""
        edge = (diam, i, j)
        return all((float(self.d[v, k]), min(v, k), max(v, k)) < edge for v in (i, j))

    def column(self, pivot: int):
        """Reduced column owning ``pivot``, or None"""
        cached = self.reduced.get(pivot)
        if cached is not None:
            return cached
        edge = self.unreduced.pop(pivot, None)
        if edge is None:
            return None
        cached = self.reduced[pivot] = self.coboundary(*edge)
        return cached

    def reduce(self, i: int, j: int, diam: float) -> float:
        """Death of the H1 class born at edge (i, j); inf if it never dies"""
        row = self.cofacet_diameters(i, j, diam)
        k = int(np.argmin(row))
        death = float(row[k])
        if math.isinf(death):
            return math.inf
        pivot = self.key(i, j, k)
        if death == diam and self.youngest_facet(i, j, diam, k):
            self.unreduced[pivot] = (i, j, diam)
            return death

        owner = self.column(pivot)
        if owner is None:
            self.unreduced[pivot] = (i, j, diam)
            return death
        keys, diams = self.coboundary(i, j, diam)
        while owner is not None:
            keys, diams = _xor(np.concatenate([keys, owner[0]]),
                               np.concatenate([diams, owner[1]]))
            if keys.size == 0:
                return math.inf
            pivot, death = _pivot(keys, diams)
            owner = self.column(pivot)
        self.reduced[pivot] = (keys, diams)
        return death


def _pivot(keys: np.ndarray, diams: np.ndarray) -> Tuple[int, float]:
    """Oldest triangle of a chain by (diameter, key)"""
    death = diams.min()
    return int(keys[diams == death].min()), float(death)


def _xor(keys: np.ndarray, diams: np.ndarray):
    """Mod-2 sum of triangle chains given as (keys, diameters)"""
    if keys.size == 0:
        return keys, diams
    uniq, first, counts = np.unique(keys, return_index=True, return_counts=True)
    odd = (counts % 2) == 1
    return uniq[odd], diams[first[odd]]
