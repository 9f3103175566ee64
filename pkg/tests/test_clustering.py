import math

import numpy as np
import pytest

from app.core.clustering import ClusterManager
from app.core.persistence import PersistenceManager
from app.models.cluster import ClusterConfig, ClusterLabels
from app.models.diagram import PersistenceDiagram, PersistenceFeature, TrajectoryDistanceMatrix
from app.models.trajectory import Trajectory
from app.utils.errors import ArtifactError
from conftest import arc_family


def h1(*lifetimes):
    return PersistenceDiagram([PersistenceFeature(1, 0.0, l) for l in lifetimes])


class TestExtractNumClasses:

    def test_no_features_means_one_class(self):
        assert ClusterManager.extract_num_classes(PersistenceDiagram([])) == 1

    def test_single_long_feature(self):
        assert ClusterManager.extract_num_classes(h1(1.0, 0.05)) == 2

    def test_stops_on_ratio_drop(self):
        # 1.0 -> 0.9 keeps going, 0.9 -> 0.5 stops
        assert ClusterManager.extract_num_classes(h1(1.0, 0.9, 0.5, 0.45)) == 3

    def test_stops_below_min_lifetime(self):
        assert ClusterManager.extract_num_classes(h1(0.09, 0.085)) == 1

    def test_equal_lifetimes_all_count(self):
        assert ClusterManager.extract_num_classes(h1(0.5, 0.5, 0.5)) == 4

    def test_essential_feature_counts(self):
        assert ClusterManager.extract_num_classes(h1(math.inf, 0.3)) == 2

    def test_h0_is_ignored(self):
        diagram = PersistenceDiagram([PersistenceFeature(0, 0.0, 5.0),
                                      PersistenceFeature(0, 0.0, math.inf)])
        assert ClusterManager.extract_num_classes(diagram) == 1

    def test_custom_cutoff(self):
        cfg = ClusterConfig(cutoff_ratio=0.4, min_lifetime=0.1)
        assert ClusterManager.extract_num_classes(h1(1.0, 0.5, 0.25, 0.09), cfg) == 4

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ClusterConfig(cutoff_ratio=0.0)
        with pytest.raises(ValueError):
            ClusterConfig(min_lifetime=-1.0)

    def test_split(self):
        retained, discarded = ClusterManager.split_h1_features(h1(0.2, 1.0, 0.95))
        assert [f.lifetime for f in retained] == [1.0, 0.95]
        assert [f.lifetime for f in discarded] == [0.2]


class TestTrajectoryDistance:

    def test_identical_trajectories(self):
        a, = arc_family([1], [1.0])
        assert ClusterManager.pairwise_trajectory_distance(a, a) == pytest.approx(0.0)

    def test_parallel_lines(self):
        a = Trajectory(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
        b = Trajectory(np.array([[0.0, 3.0], [1.0, 3.0], [2.0, 3.0]]))
        assert ClusterManager.pairwise_trajectory_distance(a, b, False) == pytest.approx(3.0)

    def test_asymmetric_directed_distance_is_symmetrized(self):
        short = Trajectory(np.array([[0.0, 0.0], [1.0, 0.0]]))
        long = Trajectory(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 2.0]]))
        d_ab = ClusterManager.pairwise_trajectory_distance(short, long, False)
        d_ba = ClusterManager.pairwise_trajectory_distance(long, short, False)
        assert d_ab == pytest.approx(d_ba)
        assert d_ab == pytest.approx(0.0)
        kinked = Trajectory(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]))
        d = ClusterManager.pairwise_trajectory_distance(short, kinked, False)
        assert d == pytest.approx(1.0)

    def test_matrix_matches_pairwise(self, two_families):
        m = PersistenceManager.build_filtration_matrix(two_families)
        dist = ClusterManager.trajectory_distances(m)
        for i in range(len(two_families)):
            for j in range(len(two_families)):
                if i == j:
                    assert dist.d[i, j] == 0.0
                    continue
                expected = ClusterManager.pairwise_trajectory_distance(
                    two_families[i], two_families[j])
                assert dist.d[i, j] == pytest.approx(expected, abs=1e-12)

    def test_families_are_far_apart(self, two_families):
        m = PersistenceManager.build_filtration_matrix(two_families)
        d = ClusterManager.trajectory_distances(m).d
        within = max(d[0, 1], d[1, 2], d[0, 2], d[3, 4], d[4, 5], d[3, 5])
        across = min(d[i, j] for i in range(3) for j in range(3, 6))
        assert within < 0.25
        assert across > 1.5


class TestSingleLinkage:

    def line(self, xs):
        xs = np.asarray(xs, float)
        return TrajectoryDistanceMatrix(np.abs(xs[:, None] - xs[None, :]))

    def test_two_groups(self):
        labels = ClusterManager.single_linkage(self.line([0.0, 0.1, 5.0, 0.2, 5.1]), 2)
        assert labels.labels.tolist() == [0, 0, 1, 0, 1]
        assert labels.sizes() == [3, 2]

    def test_k_equals_n(self):
        labels = ClusterManager.single_linkage(self.line([3.0, 1.0, 2.0]), 3)
        assert labels.labels.tolist() == [0, 1, 2]

    def test_k_one(self):
        labels = ClusterManager.single_linkage(self.line([3.0, 1.0, 2.0, 9.0]), 1)
        assert labels.labels.tolist() == [0, 0, 0, 0]

    def test_chaining(self):
        labels = ClusterManager.single_linkage(self.line([0, 1, 2, 3, 10]), 2)
        assert labels.labels.tolist() == [0, 0, 0, 0, 1]

    def test_ties_break_by_index(self):
        labels = ClusterManager.single_linkage(self.line([0.0, 1.0, 2.0]), 2)
        assert labels.labels.tolist() == [0, 0, 1]

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            ClusterManager.single_linkage(self.line([0.0, 1.0]), 3)
        with pytest.raises(ValueError):
            ClusterManager.single_linkage(self.line([0.0, 1.0]), 0)

    def test_two_families(self, two_families):
        m = PersistenceManager.build_filtration_matrix(two_families)
        k = ClusterManager.extract_num_classes(PersistenceManager.rips_persistence(m))
        assert k == 2
        labels = ClusterManager.single_linkage(ClusterManager.trajectory_distances(m), k)
        assert labels.labels.tolist() == [0, 0, 0, 1, 1, 1]
        signs = [t.meta['sign'] for t in two_families]
        assert ClusterManager.agreement(labels, signs) == 1.0

    @staticmethod
    def random_matrix(rng, n):
        upper = np.triu(rng.uniform(0.0, 10.0, size=(n, n)), 1)
        return upper + upper.T

    @staticmethod
    def partition(labels):
        return {frozenset(np.flatnonzero(labels == c).tolist()) for c in np.unique(labels)}

    @staticmethod
    def agglomerate(d, k):
        """Merge the closest pair of clusters until k remain"""
        clusters = [{i} for i in range(d.shape[0])]
        while len(clusters) > k:
            a, b = min(((a, b) for a in range(len(clusters)) for b in range(a + 1, len(clusters))),
                       key=lambda p: min(d[i, j] for i in clusters[p[0]] for j in clusters[p[1]]))
            clusters[a] |= clusters.pop(b)
        return {frozenset(c) for c in clusters}

    def test_matches_brute_force_agglomeration(self):
        rng = np.random.default_rng(12)
        for _ in range(60):
            n = int(rng.integers(2, 13))
            d = self.random_matrix(rng, n)
            for k in range(1, n + 1):
                labels = ClusterManager.single_linkage(TrajectoryDistanceMatrix(d), k).labels
                assert self.partition(labels) == self.agglomerate(d, k)
                first_seen = list(dict.fromkeys(labels.tolist()))
                assert first_seen == list(range(k))

    def test_relabelling_inputs_permutes_the_partition(self):
        rng = np.random.default_rng(13)
        for _ in range(30):
            n = int(rng.integers(2, 13))
            d = self.random_matrix(rng, n)
            perm = rng.permutation(n)
            k = int(rng.integers(1, n + 1))
            labels = ClusterManager.single_linkage(TrajectoryDistanceMatrix(d), k).labels
            permuted = ClusterManager.single_linkage(
                TrajectoryDistanceMatrix(d[np.ix_(perm, perm)]), k).labels
            moved = {frozenset(int(perm[i]) for i in block) for block in self.partition(permuted)}
            assert moved == self.partition(labels)


class TestLabels:

    def test_round_trip_dict(self):
        labels = ClusterLabels([0, 1, 1], 2)
        assert labels.to_dict() == {'k': 2, 'labels': [0, 1, 1]}
        assert ClusterLabels.from_dict(labels.to_dict()).labels.tolist() == [0, 1, 1]

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            ClusterLabels([0, 2], 2)

    def test_every_cluster_has_a_member(self):
        with pytest.raises(ValueError):
            ClusterLabels([0, 0, 2], 3)
        with pytest.raises(ValueError):
            ClusterLabels([], 1)

    def test_malformed(self):
        with pytest.raises(ArtifactError):
            ClusterLabels.from_dict({'labels': [0]})


class TestReferenceClasses:

    def test_swing_direction(self):
        t = np.linspace(0, 1, 20)
        up = Trajectory(np.column_stack([t, np.pi * t, t, t]), np.zeros((19, 1)), 0.1)
        down = Trajectory(np.column_stack([t, -np.pi * t, t, t]), np.zeros((19, 1)), 0.1)
        assert ClusterManager.swing_direction(up) == 1
        assert ClusterManager.swing_direction(down) == -1

    def test_winding_side(self):
        a, b = arc_family([1, -1], [1.0, 1.0])
        # from (-2, 0) to (2, 0) over the top is clockwise
        assert ClusterManager.winding_side(a) == -1
        assert ClusterManager.winding_side(b) == 1

    def test_agreement_with_one_mistake(self):
        labels = ClusterLabels([0, 0, 0, 1, 1], 2)
        assert ClusterManager.agreement(labels, [1, 1, -1, -1, -1]) == pytest.approx(0.8)
