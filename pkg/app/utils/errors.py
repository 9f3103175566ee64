"""
Exception hierarchy for the warm-start engine
"""


class TrajectoryEngineError(Exception):
    """Base class for all engine errors"""


class DimensionError(TrajectoryEngineError, ValueError):
    """Inputs disagree on state, control or matrix dimensions"""


class RegularizationError(TrajectoryEngineError):
    """Q_uu is not positive definite at the current regularization"""


class BoxQPError(TrajectoryEngineError):
    """Projected-Newton box QP reached its iteration cap"""


class RolloutError(TrajectoryEngineError):
    """Forward rollout produced a non-finite state"""


class TrainingError(TrajectoryEngineError):
    """Training diverged or received unusable data"""


class PlanningError(TrajectoryEngineError):
    """Sampling planner exhausted its node budget"""


class ArtifactError(TrajectoryEngineError):
    """A stage artifact is missing or malformed"""
