class TensorNetworkError(ValueError):
    """
    Base error for invalid tensor network input or a failed numerical step.

    Every error carries a short machine-readable ``code``, the same way
    serializer validation errors do.
    """
    default_code = 'invalid'

    def __init__(self, message, code=None):
        super().__init__(message)
        self.code = code or self.default_code


class IndexMismatchError(TensorNetworkError):
    default_code = 'index_mismatch'


class NonFiniteError(TensorNetworkError):
    default_code = 'non_finite'


class FactorizationError(TensorNetworkError):
    default_code = 'factorization_failed'


class PlanError(TensorNetworkError):
    default_code = 'invalid_plan'


class DecompositionError(TensorNetworkError):
    default_code = 'decomposition_failed'


class GaugeError(TensorNetworkError):
    default_code = 'invalid_gauge'


class ScheduleError(TensorNetworkError):
    default_code = 'invalid_schedule'


class TrainingDivergedError(TensorNetworkError):
    default_code = 'training_diverged'


class TensorizedPassError(TensorNetworkError):
    default_code = 'tensorized_pass_failed'


class ContainerError(Exception):
    """Raised when a container file cannot be read or written."""
    default_code = 'container_error'

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.code = self.default_code
        self.errors = errors or {}


class BadMagicError(ContainerError):
    default_code = 'bad_magic'


class UnsupportedVersionError(ContainerError):
    default_code = 'unsupported_version'


class TruncatedContainerError(ContainerError):
    default_code = 'truncated'


class ManifestMismatchError(ContainerError):
    default_code = 'manifest_mismatch'
