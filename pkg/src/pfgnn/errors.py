"""Shared exception types."""


class PfgnnError(Exception):
    pass


class GraphFormatError(PfgnnError):
    """Malformed graph file input. Carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class SearchBudgetError(PfgnnError):
    """Search tree exceeded its node budget."""


class DepthCapError(PfgnnError):
    """Search tree hit the depth cap before reaching discrete colorings."""


class UnsupportedModeError(PfgnnError):
    """Operation not defined for this particle-state mode."""


class NumericalError(PfgnnError):
    """Non-finite or degenerate numeric state. Carries the particle index when known."""

    def __init__(self, message: str, particle: int | None = None):
        if particle is not None:
            message = f"{message} (particle {particle})"
        super().__init__(message)
        self.particle = particle
