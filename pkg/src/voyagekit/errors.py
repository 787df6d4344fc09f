"""Exception hierarchy shared across the toolkit."""


class VoyagekitError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(VoyagekitError):
    """Input data violates a documented precondition."""


class SchemaError(InvalidInputError):
    """A tabular input is missing required columns or is empty."""


class ConfigurationError(VoyagekitError):
    """A configuration value or file is unusable."""


class InsufficientDataError(VoyagekitError):
    """Not enough data to train or evaluate."""


class DegenerateFleetError(InvalidInputError):
    """Fleet-wide normalization constants are all zero."""


class DegenerateDataError(VoyagekitError):
    """Data has no variance to fit a model on."""


class UndefinedGainError(VoyagekitError):
    """Efficiency gain is undefined for a non-positive baseline score."""


class OutOfDomainError(VoyagekitError):
    """Query point lies outside the gridded domain."""


class MissingDataError(VoyagekitError):
    """A required grid cell or channel is missing."""


class UnclassifiableError(VoyagekitError):
    """A path touches no discriminative route segment."""
