"""Exception hierarchy shared by every module of the lab."""


class LabError(Exception):
    """Base class for all lab errors."""


class CapacityError(LabError):
    """A requested size exceeds a configured cap."""

    def __init__(self, message, cap=None):
        super().__init__(message)
        self.cap = cap


class OutOfRangeError(LabError, ValueError):
    pass


class DomainError(LabError, ValueError):
    pass


class PrecisionError(LabError):
    pass


class SingularityError(LabError, ArithmeticError):
    pass


class AlignmentError(LabError, ValueError):
    """Sample sequences that should share a grid do not."""


class OrderingError(LabError, ValueError):
    pass


class ContractError(LabError, ValueError):
    pass


class CalibrationError(LabError):
    pass


class IntegrityError(LabError):
    """Too many flagged samples or a corrupted precomputation."""


class ConfigError(LabError):
    """Unknown experiment or invalid parameters (usage error)."""
