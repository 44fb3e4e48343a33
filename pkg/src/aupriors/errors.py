"""Exception types shared across the package."""


class AupriorsError(Exception):
    """Base class for all package-specific errors."""


class DomainViolation(AupriorsError, ValueError):
    """A parameter point (or a finite-difference stencil around it) leaves
    the open parameter rectangle."""


class SingularCurvature(AupriorsError):
    """A curvature/information matrix failed the symmetric positive-definite
    check where one is required."""


class HNotEqualI(AupriorsError):
    """The fast field formula was requested for a model whose curvature
    limit does not match its information matrix."""


class NonIntegrable(AupriorsError):
    """Prior construction detected an asymmetric field Jacobian: no potential
    exists, so the line integral would be path dependent."""


class QuadratureFailure(AupriorsError):
    """Adaptive quadrature exhausted its subdivision budget before reaching
    the requested absolute tolerance."""


class NotDiagonal(AupriorsError):
    """The diagonal-information shortcut was applied to a model whose
    information matrix carries off-diagonal mass."""


class MassUnderflow(AupriorsError):
    """The truncated-gamma target places numerically zero mass on (0, 1)."""


class ProprietyViolation(AupriorsError):
    """The dataset fails the rank conditions that guarantee a proper
    posterior under the improper priors."""


class NonFiniteDraw(AupriorsError):
    """A Gibbs update produced a non-finite or out-of-support value; carries
    diagnostic state in ``args``."""


class DegenerateSample(AupriorsError):
    """Closed-form posterior summaries need sample variation that the data
    do not have (all-equal sample, exact fit, rank deficiency)."""


class UnknownModel(AupriorsError, KeyError):
    """No catalog entry under the requested model id."""


class RunAborted(AupriorsError):
    """A simulation run exceeded the tolerated per-replication failure rate."""
