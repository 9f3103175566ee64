"""
Services package initialization
"""
from app.services.clustering_service import ClusteringService
from app.services.dataset_service import DatasetService
from app.services.training_service import TrainingService
from app.services.benchmark_service import BenchmarkService

__all__ = ['ClusteringService', 'DatasetService', 'TrainingService', 'BenchmarkService']
