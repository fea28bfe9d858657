"""Exception hierarchy shared by every module."""


class IFSCouplerError(Exception):
    """Base class for all package errors."""


class ModelError(IFSCouplerError):
    """A model violates a structural requirement (negative density, lost mass, ...)."""


class EvaluationError(ModelError):
    """An evaluator returned a non-finite value."""


class AuditError(IFSCouplerError):
    """An operation needs an assumption the audit did not confirm."""

    def __init__(self, message, failing=()):
        super().__init__(message)
        self.failing = tuple(failing)


class CertificateError(IFSCouplerError):
    """The rate certificate cannot be assembled."""


class RateFitError(IFSCouplerError):
    """Exponential fit is impossible or non-contractive."""


class SupportCapError(IFSCouplerError):
    """Combined support is too large for the dense LP; subsample first."""


class ConfigError(IFSCouplerError):
    """Malformed experiment or model configuration."""
