class AsituError(ValueError):
    """Base class for every error raised by the package."""


class DimensionError(AsituError):
    pass


class FormatError(AsituError):
    pass


class OverlapError(AsituError):
    pass


class SingularFitError(AsituError):
    pass


class InsufficientDataError(AsituError):
    pass
