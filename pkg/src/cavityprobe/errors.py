"""Exception types shared across the simulation modules."""


class CavityProbeError(Exception):
    """Base class for all package-specific failures."""


class NumericalError(CavityProbeError):
    """A linear solve, recursion or integration failed its accuracy contract."""


class DegenerateSteadyStateError(NumericalError):
    """The static Liouvillian null space has dimension > 1."""


class HarmonicTailError(NumericalError):
    """The Floquet harmonic tail has not decayed; raise n_max_harmonics."""


class NotDecayedError(NumericalError):
    """A correlation function did not decay within the requested window."""


class TopologyError(CavityProbeError):
    """A scan does not show the feature structure required by an extraction."""


class ConfigError(CavityProbeError):
    """A run configuration is malformed or inconsistent."""
