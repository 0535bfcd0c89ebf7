"""Exception types raised by the toolkit."""


class WVAError(Exception):
    """Base class for all toolkit errors."""


class NotHermitianError(WVAError, ValueError):
    pass


class NotNormalizedError(WVAError, ValueError):
    pass


class NullPostselectionError(WVAError, ValueError):
    """The optimal post-selection ansatz is undefined because A|psi_i> = 0."""


class DegenerateError(WVAError, ArithmeticError):
    """A numeric degeneracy: vanishing probabilities, singular information, etc."""


class SingularInformationError(DegenerateError):
    """An outcome with (near) zero probability but nonzero derivative."""


class PostselectionImpossibleError(DegenerateError):
    """Post-selection probability underflows; the conditional state is undefined."""


class ConfigError(WVAError, ValueError):
    """Invalid run configuration."""
