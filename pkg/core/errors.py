"""Exception hierarchy shared by every lab module"""
from typing import Any, Dict, Optional


class LabError(Exception):
    """Base class for all errors raised by the lab"""


class ConfigError(LabError, ValueError):
    """A configuration value violates its documented invariant"""


class GraphMismatchError(LabError, ValueError):
    """Two graphs cannot be compared (different node labels or order)"""


class DimensionError(LabError, ValueError):
    """Array shapes do not fit together"""


class CyclicGraphError(LabError, ValueError):
    """A DAG was required but the graph has a directed cycle"""


class DataError(LabError, ValueError):
    """Input data is empty, non-finite, or misaligned with the model"""


class UnknownVariableError(LabError, ValueError):
    """A variable name is not part of the model"""


class SolverError(LabError):
    def __init__(self, message: str, last_exception: Optional[Exception] = None):
        super().__init__(message)
        self.last_exception = last_exception


class LayoutGenerationError(LabError):
    def __init__(self, message: str, attempts: int = 0):
        super().__init__(message)
        self.attempts = attempts


class EpisodeFinishedError(LabError, RuntimeError):
    """step() was called on an episode that is already done"""


class NonFiniteLossError(LabError, FloatingPointError):
    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TrainingAbortedError(LabError):
    def __init__(self, message: str, checkpoint_path: Optional[str] = None,
                 last_exception: Optional[Exception] = None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path
        self.last_exception = last_exception


class CheckpointError(LabError):
    """Checkpoint file is truncated, corrupt, or from an unknown format version"""
