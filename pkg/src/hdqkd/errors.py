"""Exception types shared across the simulator."""


class InvalidParameterError(ValueError):
    """A physical or configuration parameter is out of its valid range."""


class OrderingError(ValueError):
    """An event/tag sequence that must be time-sorted is not."""


class CapacityError(RuntimeError):
    """A requested stream would exceed the configured event budget."""


class TagFormatError(ValueError):
    """A tag file is malformed; carries the offending record index."""

    def __init__(self, message, record_index=None):
        super().__init__(message)
        self.record_index = record_index


class CoverageError(ValueError):
    """Input data does not span the range required by the analysis."""
