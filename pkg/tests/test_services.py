import numpy as np
import pytest

from app.models.cluster import ClusterLabels
from app.models.result import SolverOptions
from app.models.run_config import RunConfig, SampleSpec, TrainingOptions
from app.models.trajectory import Trajectory
from app.services.benchmark_service import (BenchmarkService, ScalingRow, cold_start,
                                            warm_starts)
from app.services.clustering_service import ClusteringService, cluster_dataset
from app.services.dataset_service import DatasetService, lift_path, sample_quadrotor_start
from app.services.training_service import TrainingService
from app.core.ocp import make_task_problem
from app.models.problem import ObstacleSet
from config import Config, TestingConfig


def short_cartpole(horizon=15):
    return dict(Config.TASKS['cartpole'], horizon=horizon)


class TestClusteringService:

    def test_two_families(self, two_families):
        result = ClusteringService().cluster_dataset(two_families)
        assert result.num_classes == 2
        assert result.labels.labels.tolist() == [0, 0, 0, 1, 1, 1]
        assert result.subset == list(range(6))
        assert result.filtration.size == 6 * 10

    def test_threaded_distances_match_serial(self, two_families):
        serial = ClusteringService(jobs=1)
        threaded = ClusteringService(jobs=3)
        embedded = serial.prepare(two_families)
        np.testing.assert_array_equal(threaded.trajectory_distances(embedded).d,
                                      serial.trajectory_distances(embedded).d)

    def test_subset_labels_every_trajectory(self, two_families):
        result = ClusteringService().cluster_dataset(two_families, subset=4, seed=3)
        assert len(result.subset) == 4
        assert len(result.labels) == 6

    def test_resampling_before_embedding(self, two_families):
        service = ClusteringService(filtration_knots=5)
        assert all(t.horizon == 5 for t in service.prepare(two_families))

    def test_empty(self):
        with pytest.raises(ValueError):
            ClusteringService().cluster_dataset([])

    def test_module_function(self, two_families):
        labels, diagram, distances = cluster_dataset(two_families)
        assert labels.k == 2
        assert distances.d.shape == (6, 6)
        assert len(diagram.in_dim(1)) >= 1


class TestDatasetService:

    def options(self):
        return SolverOptions(max_iter=20)

    def test_cartpole_is_reproducible(self):
        tasks = {'cartpole': short_cartpole()}
        sample = SampleSpec('cartpole', count=2, per_start=1, seed=11, max_retries=2)
        first = DatasetService(self.options(), tasks=tasks).generate(sample)
        second = DatasetService(self.options(), tasks=tasks).generate(sample)
        assert len(first) == len(second)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.states, b.states)
            assert a.meta == b.meta

    def test_records_carry_start_and_summary(self):
        tasks = {'cartpole': short_cartpole()}
        service = DatasetService(self.options(), tasks=tasks)
        trajs = service.generate(SampleSpec('cartpole', count=2, per_start=1, seed=4,
                                            max_retries=2))
        assert len(trajs) + service.skipped >= 2
        for traj in trajs:
            assert traj.meta['converged']
            np.testing.assert_array_equal(traj.states[0], traj.meta['start'])
            assert traj.horizon == 15
            assert 'seconds' not in traj.meta

    def test_unknown_generator(self):
        with pytest.raises(ValueError):
            DatasetService(tasks=Config.TASKS).generate(SampleSpec('toy', count=1))

    def test_quadrotor_start_avoids_obstacles(self, rng):
        settings = Config.TASKS['quadrotor']
        obstacles = ObstacleSet.from_list(settings['obstacles'])
        for _ in range(20):
            x0 = sample_quadrotor_start(rng, settings)
            assert obstacles.is_free(x0[:3], Config.RRT_CLEARANCE)
            np.testing.assert_array_equal(x0[3:], 0.0)

    def test_lift_path(self):
        path = np.column_stack([np.linspace(0, 1, 5), np.zeros(5), np.zeros(5)])
        start = np.zeros(12)
        states = lift_path(path, 0.25, start)
        assert states.shape == (5, 12)
        np.testing.assert_allclose(states[1:-1, 6], 1.0)
        np.testing.assert_array_equal(states[-1, 6:9], 0.0)
        np.testing.assert_array_equal(states[:, 3:6], 0.0)


class TestTrainingService:

    def labelled(self, rng, n=24):
        trajs, labels = [], []
        for i in range(n):
            side = i % 2
            start = np.array([rng.uniform(-1, 1), float(side)])
            ramp = (1.0 if side else -1.0) * np.linspace(0, 1, 4)[:, None]
            states = np.tile(start, (4, 1)) + ramp
            trajs.append(Trajectory(states, np.zeros((3, 1)), 0.1, {'start': start.tolist()}))
            labels.append(side)
        return trajs, ClusterLabels(labels, 2)

    def test_trains_all_three(self, rng):
        trajs, labels = self.labelled(rng)
        service = TrainingService(TrainingOptions(max_epochs=5), expert_hidden=4,
                                  gating_hidden=4, knn_max_k=3)
        dataset = service.build_dataset(trajs, labels)
        models = service.train_all(dataset, labels.k)
        assert models.moe.k == 2
        assert 1 <= models.knn.k <= 3
        assert [name for name, _ in models.items()] == ['mlp', 'knn', 'moe']
        width = service.single_mlp_width(dataset, 2)
        assert models.mlp.parameter_count() == pytest.approx(models.moe.parameter_count(),
                                                             rel=0.5)
        assert models.mlp.layer_sizes[1] == width

    def test_singleton_cluster_trains(self, rng):
        trajs, _ = self.labelled(rng, n=20)
        labels = ClusterLabels([0] * 19 + [1], 2)
        service = TrainingService(TrainingOptions(max_epochs=3), expert_hidden=4,
                                  gating_hidden=4, knn_max_k=3)
        models = service.train_all(service.build_dataset(trajs, labels), labels.k)
        assert models.moe.k == 2

    def test_label_count_mismatch(self, rng):
        trajs, _ = self.labelled(rng, n=4)
        with pytest.raises(ValueError):
            TrainingService().build_dataset(trajs, ClusterLabels([0, 1], 2))

    def test_explicit_single_width(self, rng):
        trajs, labels = self.labelled(rng, n=6)
        service = TrainingService(single_hidden=7)
        assert service.single_mlp_width(service.build_dataset(trajs, labels), 2) == 7


class TestBenchmarkService:

    def test_cold_start_only(self):
        service = BenchmarkService('cartpole', SolverOptions(max_iter=5),
                                   settings=short_cartpole(12))
        report = service.run_benchmark(None, 2, seed=0, config_hash='abc')
        assert report.methods == ['cold_start']
        assert report.instance_count == 2
        assert report.config_hash == 'abc'
        stats = report.method_stats('cold_start')
        assert stats['instances'] == 2
        for record in report.records:
            assert record.iterations <= 5
            assert not record.success or record.converged

    def test_instances_must_be_positive(self):
        with pytest.raises(ValueError):
            BenchmarkService('cartpole').run_benchmark(None, 0, seed=0)

    def test_cold_start_shapes(self):
        problem = make_task_problem('quadrotor', np.r_[-2.0, -2.0, -2.0, np.zeros(9)],
                                    Config.TASKS['quadrotor'])
        X, U = cold_start(problem)
        assert X.shape == (problem.horizon, 12)
        expected = np.tile(problem.model.neutral_control(), (problem.horizon - 1, 1))
        np.testing.assert_allclose(U, expected)
        assert list(warm_starts(problem, None)) == ['cold_start']

    def test_scalability_rows(self, two_families):
        service = BenchmarkService('cartpole')
        rows = service.scalability_study(two_families, [2, 4, 99], [5])
        summary = [(r.trajectories, r.segments, r.embedded_dim) for r in rows]
        assert summary == [(2, 8, 3), (4, 16, 3)]
        assert all(r.seconds >= 0 for r in rows)

    def test_power_law_recovers_exponent(self):
        rows = [ScalingRow(n, 2, n, 1e-3 * n ** 2.0) for n in (10, 20, 40, 80)]
        exponent, r2 = BenchmarkService.fit_power_law(rows)
        assert exponent == pytest.approx(2.0)
        assert r2 == pytest.approx(1.0)

    def test_power_law_needs_two_sizes(self):
        with pytest.raises(ValueError):
            BenchmarkService.fit_power_law([ScalingRow(2, 5, 8, 0.1)])


class TestRunConfig:

    def mapping(self):
        return {k: getattr(TestingConfig, k) for k in dir(TestingConfig) if k.isupper()}

    def test_from_mapping_overrides(self):
        run = RunConfig.from_mapping(self.mapping(), task='toy', seed=9, mode=None)
        assert run.task == 'toy'
        assert run.seed == 9
        assert run.training.seed == 9
        assert run.mode == 'full_state'
        assert run.training.max_epochs == TestingConfig.MAX_EPOCHS

    def test_unknown_task_and_option(self):
        with pytest.raises(ValueError):
            RunConfig.from_mapping(self.mapping(), task='pendulum')
        with pytest.raises(ValueError):
            RunConfig.from_mapping(self.mapping(), colour='red')

    def test_hash_ignores_output_and_jobs(self):
        a = RunConfig.from_mapping(self.mapping())
        b = RunConfig.from_mapping(self.mapping())
        b.output_dir, b.jobs = '/elsewhere', 8
        assert a.config_hash() == b.config_hash()
        b.seed += 1
        assert a.config_hash() != b.config_hash()

    def test_dict_round_trip(self):
        run = RunConfig.from_mapping(self.mapping())
        assert RunConfig.from_dict(run.to_dict()).config_hash() == run.config_hash()

    def test_sample_spec(self):
        run = RunConfig.from_mapping(self.mapping(), task='quadrotor', count=3)
        sample = run.sample_spec
        assert (sample.task, sample.count, sample.per_start) == ('quadrotor', 3, 1)
