"""Exception hierarchy shared by all modules.

Each error carries a short category string used by the CLI to pick an
exit code and by the service to label HTTP error payloads.
"""


class LovsimError(Exception):
    """Base class for all package errors."""

    category = "error"


class ConfigurationError(LovsimError):
    """Invalid configuration value, unknown key, or bad element ordering."""

    category = "config"


class NormalizationError(LovsimError):
    """A spinor that must have unit norm does not."""

    category = "normalization"


class ShapeError(LovsimError):
    """Operands defined on different grids or with mismatched dimensions."""

    category = "shape"


class PhysicsDomainError(LovsimError):
    """Quantity undefined for the given physical inputs (e.g. B = 0)."""

    category = "domain"


class NumericalError(LovsimError):
    """NaN or non-finite amplitudes encountered during simulation."""

    category = "numerics"


class ResolutionError(LovsimError):
    """Grid too coarse for the requested analysis."""

    category = "resolution"


class IllConditionedError(LovsimError):
    """Analysis loop passes through (or too close to) an amplitude zero."""

    category = "ill-conditioned"


class NoLatticeError(LovsimError):
    """No periodic structure found in an intensity map."""

    category = "no-lattice"
