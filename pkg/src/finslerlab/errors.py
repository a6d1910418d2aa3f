"""Exception types shared across the toolkit."""


class FinslerlabError(Exception):
    """Base class for all toolkit errors."""


class BasePointMismatch(FinslerlabError):
    """Jet arithmetic between jets anchored at different (r, s) points."""


class DivisionByZeroJet(FinslerlabError):
    """Jet division by a jet whose value part is zero (tolerance 1e-14)."""


class DomainError(FinslerlabError):
    """Argument outside a function's or profile's validity domain."""


class ZeroTangent(FinslerlabError):
    """Tangent vector y = 0 where a direction is required."""


class ZeroRadius(FinslerlabError):
    """Spray evaluation at r = 0 (the 1/r factor is singular)."""


class SingularDenominator(FinslerlabError):
    """A structural denominator vanished (reports the offending margin)."""

    def __init__(self, message, margin=None):
        super().__init__(message)
        self.margin = margin


class NonpositivePhi(FinslerlabError):
    """phi <= 0 where a positive metric profile value is required."""


class DomainExit(FinslerlabError):
    """Trajectory left the declared domain (flag, also raised internally)."""


class InsufficientPoints(FinslerlabError):
    """Too few sample points for a fit."""


class UnknownEntry(FinslerlabError):
    """Catalog id not found."""


class ParamOutOfRange(FinslerlabError):
    """Catalog or family parameter outside its validity range."""


class SingularIntegrand(FinslerlabError):
    """1 - 2 r^2 g(r) vanished on the requested integration range."""


class QuadratureFailure(FinslerlabError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class CompatibilityFailure(FinslerlabError):
    """Integrability condition violated for a constant-curvature build."""


class PositivityFailure(FinslerlabError):
    """A built profile failed the Finsler positivity conditions."""


class NanEncountered(FinslerlabError):
    """NaN/Inf in a jet coefficient during a grid evaluation."""


class ConfigError(FinslerlabError):
    """Malformed run configuration (CLI exit code 2)."""
