"""Exception types shared across the toolkit."""


class GeomechError(Exception):
    """Base class for all toolkit errors."""


class AngleNearPi(GeomechError):
    """Rotation too close to a half-turn for a unique logarithm."""


class StepTooLarge(GeomechError):
    """Timestep too large for the requested angular rate."""


class NoConvergence(GeomechError):
    """An implicit solve exceeded its iteration budget."""


class SingularConfiguration(GeomechError):
    """A body point passed through the attracting center."""


class StepUnderflow(GeomechError):
    """Adaptive step size collapsed below the resolvable scale."""


class IllConditioned(GeomechError):
    """A linear system is too ill-conditioned to invert reliably."""


class LineSearchStalled(GeomechError):
    """Backtracking line search reduced the step below its floor."""


class MaxIterations(GeomechError):
    """An iterative solver hit its iteration cap before converging."""


class InfeasibleOrStalled(GeomechError):
    """Constrained optimization failed to reach feasibility."""


class NoBracket(GeomechError):
    """A scan found no sign change over the requested range."""


class DegenerateGain(GeomechError):
    """Shaping gain makes the momentum relation singular."""


class ConfigError(GeomechError):
    """Base class for configuration-file problems."""


class ParseError(ConfigError):
    """Malformed or unrecognized configuration entry."""


class MissingKey(ConfigError):
    """A required configuration key is absent."""


class BadValue(ConfigError):
    """A configuration value failed validation."""
