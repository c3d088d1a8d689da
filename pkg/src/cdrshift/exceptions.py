"""Error types raised by the package.

Every error raised on purpose derives from :class:`CdrError`, so callers can
separate declared failures from genuine bugs.
"""


class CdrError(Exception):
    """Base class for declared failures."""


class InvalidDistribution(CdrError, ValueError):
    """A density or prior does not describe a valid distribution."""


class ZeroMarginalDensity(CdrError, ValueError):
    """The posterior was requested where the marginal density vanishes."""


class UnsupportedSampler(CdrError, NotImplementedError):
    """The density family cannot be sampled."""


class UnsupportedDomain(CdrError, ValueError):
    """The operation is not defined on this kind of feature domain."""


class DomainError(CdrError, ValueError):
    """A feature vector lies outside the feature domain."""


class SupportViolation(CdrError, ValueError):
    """The target marginal charges a region the source marginal misses."""


class NonMonotoneMap(CdrError, ValueError):
    """A posterior map is not increasing on [0, 1]."""


class DegeneratePrior(CdrError, ValueError):
    """A derived class prior is numerically 0 or 1."""


class NoiseTooLarge(CdrError, ValueError):
    """Label-flip rates leave no signal (rho0 + rho1 >= 1 or nu >= 1/2)."""


class OutOfRange(CdrError, ValueError):
    """A value lies outside the range of a map."""


class GridTooLarge(CdrError, ValueError):
    """The brute-force solver only handles small grids."""


class AssumptionAViolated(CdrError, ValueError):
    """No upper level set of the posterior has the requested marginal mass."""


class SingularKernelMatrix(CdrError, ArithmeticError):
    """The Newton system could not be factorised even after jitter."""


class RankOutOfRange(CdrError, ValueError):
    """The requested order statistic does not exist for this sample size."""


class InvalidInput(CdrError, ValueError):
    """An argument is outside the accepted range (sample sizes, levels, options)."""
