import itertools
import math
import time

import numpy as np
import pytest
from scipy.sparse.csgraph import minimum_spanning_tree

from app.core.clustering import ClusterManager
from app.core.persistence import PersistenceManager
from app.models.cluster import ClusterConfig
from app.models.diagram import DistanceMatrix, PersistenceDiagram, PersistenceFeature
from app.models.trajectory import Trajectory
from app.utils.errors import ArtifactError, DimensionError
from conftest import arc_family


def boundary_reduction(d, threshold):
    """
    Textbook Z/2 boundary reduction of the Rips 2-skeleton.

    Returns {dim: (sorted finite (birth, death) pairs, essential count)} for
    dimensions 0 and 1.
    """
    n = d.shape[0]
    simplices = [(0.0, 0, (i,)) for i in range(n)]
    for i, j in itertools.combinations(range(n), 2):
        if d[i, j] <= threshold:
            simplices.append((d[i, j], 1, (i, j)))
    for i, j, k in itertools.combinations(range(n), 3):
        diam = max(d[i, j], d[i, k], d[j, k])
        if diam <= threshold:
            simplices.append((diam, 2, (i, j, k)))
    simplices.sort(key=lambda s: (s[0], s[1], s[2]))
    index = {s[2]: pos for pos, s in enumerate(simplices)}

    columns = []
    for _, dim, verts in simplices:
        if dim == 0:
            columns.append(set())
        else:
            columns.append({index[face] for face in itertools.combinations(verts, dim)})

    low_owner = {}
    pairs = []
    paired = set()
    for c, col in enumerate(columns):
        while col:
            low = max(col)
            if low not in low_owner:
                low_owner[low] = c
                pairs.append((low, c))
                paired.update((low, c))
                break
            col ^= columns[low_owner[low]]
        columns[c] = col

    result = {}
    for dim in (0, 1):
        finite = sorted((simplices[b][0], simplices[dth][0]) for b, dth in pairs
                        if simplices[b][1] == dim)
        finite = [p for p in finite if p[1] - p[0] >= 1e-12]
        essential = sum(1 for s in range(len(simplices))
                        if s not in paired and simplices[s][1] == dim)
        result[dim] = (finite, essential)
    return result


def finite_pairs(diagram, dim):
    return sorted((f.birth, f.death) for f in diagram.in_dim(dim) if not f.is_essential)


def assert_same_diagram(diagram, expected):
    for dim, (finite, essential) in expected.items():
        ours = finite_pairs(diagram, dim)
        assert len(ours) == len(finite), f"H{dim}: {ours} != {finite}"
        if finite:
            np.testing.assert_allclose(ours, finite, atol=1e-12)
        assert diagram.essential_count(dim) == essential


def euclidean(points):
    return np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)


def unit_square():
    return euclidean(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


def random_cloud(rng):
    n = int(rng.integers(3, 21))
    dim = int(rng.integers(2, 5))
    return euclidean(rng.normal(size=(n, dim)))


class TestRipsPersistence:

    def test_square_has_one_loop(self):
        diagram = PersistenceManager.rips_persistence(unit_square())
        h1 = diagram.in_dim(1)
        assert len(h1) == 1
        assert h1[0].birth == pytest.approx(1.0)
        assert h1[0].death == pytest.approx(math.sqrt(2))
        assert diagram.threshold == pytest.approx(math.sqrt(2))

    def test_square_components(self):
        diagram = PersistenceManager.rips_persistence(unit_square())
        h0 = diagram.in_dim(0)
        assert diagram.essential_count(0) == 1
        assert sorted(f.death for f in h0 if not f.is_essential) == pytest.approx([1.0] * 3)

    def test_matches_boundary_reduction_on_random_clouds(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            d = random_cloud(rng)
            diagram = PersistenceManager.rips_persistence(d, threshold=np.inf)
            assert_same_diagram(diagram, boundary_reduction(d, np.inf))

    @pytest.mark.parametrize('seed', range(5))
    def test_matches_boundary_reduction_at_threshold(self, seed):
        d = euclidean(np.random.default_rng(100 + seed).uniform(size=(14, 3)))
        diagram = PersistenceManager.rips_persistence(d)
        assert_same_diagram(diagram, boundary_reduction(d, diagram.threshold))

    def test_matches_boundary_reduction_with_ties(self):
        rng = np.random.default_rng(77)
        for _ in range(30):
            points = rng.integers(0, 4, size=(int(rng.integers(4, 12)), 2)).astype(float)
            d = np.abs(points[:, None, :] - points[None, :, :]).sum(axis=2)
            diagram = PersistenceManager.rips_persistence(d, threshold=np.inf)
            assert_same_diagram(diagram, boundary_reduction(d, np.inf))

    def test_h0_deaths_are_spanning_tree_edges(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            d = random_cloud(rng)
            diagram = PersistenceManager.rips_persistence(d, threshold=np.inf)
            tree = minimum_spanning_tree(d).toarray()
            np.testing.assert_allclose(sorted(f.death for f in diagram.in_dim(0)
                                              if not f.is_essential),
                                       np.sort(tree[tree > 0]), atol=1e-12)

    def test_relabelling_points_keeps_the_diagram(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            d = random_cloud(rng)
            perm = rng.permutation(d.shape[0])
            a = PersistenceManager.rips_persistence(d)
            b = PersistenceManager.rips_persistence(d[np.ix_(perm, perm)])
            assert b.threshold == a.threshold
            for dim in (0, 1):
                np.testing.assert_allclose(finite_pairs(b, dim), finite_pairs(a, dim),
                                           atol=1e-12)
                assert b.essential_count(dim) == a.essential_count(dim)

    @pytest.mark.parametrize('scale', [0.25, 3.0])
    def test_scaling_distances_scales_the_diagram(self, scale):
        rng = np.random.default_rng(9)
        for _ in range(20):
            d = random_cloud(rng)
            a = PersistenceManager.rips_persistence(d)
            b = PersistenceManager.rips_persistence(scale * d)
            assert b.threshold == pytest.approx(scale * a.threshold)
            for dim in (0, 1):
                expected = scale * np.array(finite_pairs(a, dim)).reshape(-1, 2)
                np.testing.assert_allclose(np.array(finite_pairs(b, dim)).reshape(-1, 2),
                                           expected, rtol=1e-9, atol=1e-12)
                assert b.essential_count(dim) == a.essential_count(dim)

    def test_segment_filtration_stays_fast(self):
        trajs = arc_family([1, -1] * 10, np.linspace(0.5, 0.75, 20), knots=10)
        matrix = PersistenceManager.build_filtration_matrix(trajs)
        started = time.perf_counter()
        diagram = PersistenceManager.rips_persistence(matrix)
        assert time.perf_counter() - started < 5.0
        assert ClusterManager.extract_num_classes(diagram, ClusterConfig()) == 2

    def test_full_complex_has_no_essential_loops(self, rng):
        d = euclidean(rng.normal(size=(9, 2)))
        diagram = PersistenceManager.rips_persistence(d, threshold=np.inf)
        assert diagram.essential_count(1) == 0
        assert diagram.essential_count(0) == 1

    def test_zero_threshold_keeps_points_apart(self, rng):
        d = euclidean(rng.normal(size=(5, 2)))
        diagram = PersistenceManager.rips_persistence(d, threshold=0.0)
        assert diagram.essential_count(0) == 5
        assert diagram.in_dim(1) == []

    def test_single_point(self):
        diagram = PersistenceManager.rips_persistence(np.zeros((1, 1)))
        assert diagram.in_dim(0) == [PersistenceFeature(0, 0.0, math.inf)]
        assert diagram.in_dim(1) == []

    def test_max_dim_zero(self):
        diagram = PersistenceManager.rips_persistence(unit_square(), max_dim=0)
        assert diagram.in_dim(1) == []

    def test_bad_max_dim(self):
        with pytest.raises(ValueError):
            PersistenceManager.rips_persistence(unit_square(), max_dim=2)

    def test_rejects_asymmetric(self):
        d = unit_square()
        d[0, 1] += 0.5
        with pytest.raises(ValueError):
            PersistenceManager.rips_persistence(d)

    def test_rejects_nonzero_diagonal(self):
        d = unit_square()
        d[2, 2] = 0.1
        with pytest.raises(ValueError):
            PersistenceManager.rips_persistence(d)

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            PersistenceManager.rips_persistence(np.zeros((2, 3)))

    def test_zero_length_features_dropped(self):
        d = np.zeros((4, 4))
        diagram = PersistenceManager.rips_persistence(d)
        assert len(diagram.in_dim(0)) == 1
        assert diagram.in_dim(1) == []


class TestFiltrationMatrix:

    def test_consecutive_segments_touch(self, two_families):
        m = PersistenceManager.build_filtration_matrix(two_families[:2], connect_endpoints=False)
        assert m.size == 20
        for r in range(9):
            assert m.d[r, r + 1] == 0.0
        np.testing.assert_array_equal(m.d, m.d.T)
        assert m.index_map[10] == (1, 0)

    def test_endpoints_glued(self):
        a = Trajectory(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
        b = Trajectory(np.array([[0.0, 5.0], [1.0, 5.0], [2.0, 5.0]]))
        loose = PersistenceManager.build_filtration_matrix([a, b], connect_endpoints=False)
        glued = PersistenceManager.build_filtration_matrix([a, b], connect_endpoints=True)
        assert loose.d[0, 2] == pytest.approx(5.0)
        assert glued.d[0, 2] == 0.0
        assert glued.d[1, 3] == 0.0
        assert glued.d[0, 3] == pytest.approx(5.0)

    def test_offsets(self, two_families):
        m = PersistenceManager.build_filtration_matrix(two_families)
        np.testing.assert_array_equal(m.trajectory_offsets(), np.arange(0, 70, 10))

    def test_empty_dataset(self):
        with pytest.raises(ValueError):
            PersistenceManager.build_filtration_matrix([])

    def test_mixed_dimensions(self):
        a = Trajectory(np.zeros((3, 2)))
        b = Trajectory(np.zeros((3, 3)))
        with pytest.raises(DimensionError):
            PersistenceManager.build_filtration_matrix([a, b])

    def test_two_families_have_one_long_hole(self, two_families):
        m = PersistenceManager.build_filtration_matrix(two_families)
        diagram = PersistenceManager.rips_persistence(m)
        lifetimes = diagram.lifetimes(1)
        assert lifetimes[0] > 1.0
        assert all(l < 0.8 * lifetimes[0] for l in lifetimes[1:])

    def test_separating_distance_lies_inside_the_hole(self, two_families):
        m = PersistenceManager.build_filtration_matrix(two_families)
        diagram = PersistenceManager.rips_persistence(m)
        longest = max(diagram.in_dim(1), key=lambda f: f.lifetime)
        eps = PersistenceManager.separating_distance(diagram, ClusterConfig())
        assert longest.birth <= eps < longest.death


class TestSeparatingDistance:

    def test_no_retained_returns_threshold(self):
        diagram = PersistenceDiagram([PersistenceFeature(1, 0.0, 0.05)], threshold=2.0)
        assert PersistenceManager.separating_distance(diagram) == 2.0

    def test_midpoint_between_discarded_death_and_retained_birth(self):
        diagram = PersistenceDiagram([
            PersistenceFeature(1, 0.0, 0.2),
            PersistenceFeature(1, 0.4, 2.0),
        ], threshold=3.0)
        assert PersistenceManager.separating_distance(diagram) == pytest.approx(0.3)

    def test_overlapping_births_use_retained_death(self):
        diagram = PersistenceDiagram([
            PersistenceFeature(1, 0.1, 0.5),
            PersistenceFeature(1, 0.0, 1.5),
        ], threshold=3.0)
        assert PersistenceManager.separating_distance(diagram) == pytest.approx(1.0)


class TestDiagramSerialization:

    def test_essential_death_is_null(self):
        diagram = PersistenceDiagram([PersistenceFeature(0, 0.0, math.inf)])
        assert diagram.to_list() == [{'dim': 0, 'birth': 0.0, 'death': None}]
        again = PersistenceDiagram.from_list(diagram.to_list())
        assert again.in_dim(0)[0].is_essential

    def test_malformed(self):
        with pytest.raises(ArtifactError):
            PersistenceDiagram.from_list([{'birth': 0.0}])

    def test_matrix_bytes(self):
        m = DistanceMatrix(unit_square())
        blob = m.to_bytes()
        assert blob[:4] == b'TWFM'
        assert len(blob) == 8 + 8 * 16
        np.testing.assert_array_equal(DistanceMatrix.from_bytes(blob).d, m.d)

    def test_truncated_matrix_bytes(self):
        blob = DistanceMatrix(unit_square()).to_bytes()[:-8]
        with pytest.raises(ArtifactError):
            DistanceMatrix.from_bytes(blob)
