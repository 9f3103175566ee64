"""
Utils package initialization
"""
from app.utils.errors import (ArtifactError, BoxQPError, DimensionError, PlanningError,
                              RegularizationError, RolloutError, TrainingError,
                              TrajectoryEngineError)

__all__ = ['ArtifactError', 'BoxQPError', 'DimensionError', 'PlanningError',
           'RegularizationError', 'RolloutError', 'TrainingError', 'TrajectoryEngineError']
