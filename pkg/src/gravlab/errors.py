"""Exception hierarchy shared by all gravlab modules.

The CLI maps ConfigError to exit code 1 (user/usage problem) and every
other GravlabError to exit code 2 (numerical or data problem).
"""


class GravlabError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(GravlabError):
    """Invalid configuration: unknown key, bad type, violated invariant."""


class DomainError(GravlabError):
    """Arguments outside the documented domain of an operation."""


class DataError(GravlabError):
    """Input data that cannot be analyzed (empty, malformed, inconsistent)."""


class NumericalError(GravlabError):
    """An integrator, optimizer or quadrature failed to converge."""


class CalibrationError(GravlabError):
    """Requested noise targets are infeasible for the Gaussian model."""


class FitError(NumericalError):
    """Nonlinear fit did not converge; carries best-so-far diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
