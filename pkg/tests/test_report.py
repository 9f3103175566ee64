import pytest

from app.models.report import BenchmarkReport, InstanceRecord


def record(instance, method, success, iterations, cost):
    return InstanceRecord(instance, method, converged=success, success=success,
                          iterations=iterations, final_cost=cost,
                          cost_trace=[(cost + 1.0, 0.0), (cost, 0.1)])


@pytest.fixture
def report():
    report = BenchmarkReport('quadrotor', ['cold_start', 'moe'], 'abc')
    report.add_record(record(0, 'cold_start', False, 100, float('inf')))
    report.add_record(record(1, 'cold_start', True, 40, 10.0))
    report.add_record(record(0, 'moe', True, 5, 2.0))
    report.add_record(record(1, 'moe', True, 9, 4.0))
    return report


def test_statistics_use_successes_only(report):
    stats = report.method_stats('cold_start')
    assert stats['instances'] == 2
    assert stats['success_count'] == 1
    assert stats['success_rate'] == 0.5
    assert stats['iterations_mean'] == 40.0
    assert stats['final_cost_mean'] == 10.0


def test_recomputed_from_records(report):
    successes = [r for r in report.to_dict()['records'] if r['method'] == 'moe' and r['success']]
    mean = sum(r['iterations'] for r in successes) / len(successes)
    assert report.method_stats('moe')['iterations_mean'] == pytest.approx(mean)
    assert report.method_stats('moe')['iterations_std'] == pytest.approx(2.0)


def test_no_successes():
    report = BenchmarkReport('cartpole', ['mlp'], '')
    report.add_record(record(0, 'mlp', False, 7, 50.0))
    stats = report.method_stats('mlp')
    assert stats['success_count'] == 0
    assert stats['iterations_mean'] is None
    assert report.method_stats('knn')['instances'] == 0


def test_summary_fields(report):
    data = report.to_dict()
    assert data['instances'] == 2
    assert data['config_hash'] == 'abc'
    assert report.best_method() == 'moe'
    assert data['records'][0]['cost_trace'] == [[float('inf'), 0.0], [float('inf'), 0.1]]
    assert len(report.trace_rows()) == 8
