"""Exception types raised across the package.

The CLI maps these onto process exit codes: input problems exit with 2,
estimation failures with 3, and unreliable resampling inference with 4.
"""


class SurroptError(Exception):
    """Base class for all package errors."""


class ParseError(SurroptError):
    """A CSV source could not be parsed; carries the offending row number."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ValidationError(SurroptError):
    """Input records or parameters violate a documented invariant."""


class EstimationError(SurroptError):
    """Base class for failures inside an estimator."""


class EmptyStratumError(EstimationError):
    """A stratum the transform needs has no contributing subjects.

    Carries ``counts``, a dict of stratum name -> subject count, so callers
    can report what was missing.
    """

    def __init__(self, message, counts=None):
        super().__init__(message)
        self.counts = dict(counts or {})


class DegenerateArmError(EstimationError):
    """An arm has zero total weight at an evaluation time."""


class DegenerateSampleError(EstimationError):
    """Too few distinct values to compute a bandwidth."""


class PositivityError(EstimationError):
    """The censoring survival estimate vanished where a weight needs it."""

    def __init__(self, message, subject_id=None, time=None):
        super().__init__(message)
        self.subject_id = subject_id
        self.time = time


class IllDefinedPTEError(EstimationError):
    """The estimated treatment effect is too close to zero for a ratio."""


class NodeFitError(EstimationError):
    """A transform fit failed at one node of a time grid; names the node."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class UnreliableInferenceError(SurroptError):
    """Too many resampling replicates failed; carries the partial result."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InternalConsistencyError(SurroptError):
    """An oracle self-check failed; indicates a bug, not bad input."""
