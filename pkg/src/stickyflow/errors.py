"""Exception types shared across the package."""


class StickyFlowError(Exception):
    """Base class for all stickyflow errors."""


class InvalidSpecError(StickyFlowError, ValueError):
    """A measure specification is malformed or not normalizable."""


class InvalidInputError(StickyFlowError, ValueError):
    """Particle or velocity data violates a precondition."""


class TimeRangeError(StickyFlowError, ValueError):
    """A query time lies outside the simulated range."""


class DomainError(StickyFlowError, ValueError):
    """An argument sits at a degenerate point of an operation's domain."""


class AmbiguousTimeError(StickyFlowError, ValueError):
    """A query time coincides with a merge event, so one-sided data is ambiguous."""


class InvalidPartitionError(StickyFlowError, ValueError):
    """A grouping does not partition the atom indices."""


class InvalidGridError(StickyFlowError, ValueError):
    """An evaluation grid point lies outside the measure's support."""
