"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to.
"""


class HQError(Exception):
    exit_code = 1


class DegenerateTolerance(HQError):
    """No clear spectral gap around the rank threshold."""


class BoundaryStencil(HQError):
    """A difference stencil left the chart domain."""


class SpecParse(HQError):
    exit_code = 2


class ConfigError(HQError):
    exit_code = 2


class QuaternionicOsculant(HQError):
    """Osculating space meets its j-image: W + Wj is not everything."""


class FlagUnavailable(HQError):
    pass


class NotFull(HQError):
    """Some flag derivative vanishes identically."""


class NonFrenet(HQError):
    """The canonical complex structure could not be built smoothly."""


class RankOne(HQError):
    """Projection target has quaternionic rank one (flat line bundle)."""


class NotStable(HQError):
    """A subspace expected to be S-stable is not."""


class UnresolvedZero(HQError):
    """Winding numbers on two radii disagree."""


class NonIntegral(HQError):
    """A degree quadrature is too far from an integer."""


class NoBackwardTransform(HQError):
    exit_code = 3


class NoForwardTransform(HQError):
    exit_code = 3
