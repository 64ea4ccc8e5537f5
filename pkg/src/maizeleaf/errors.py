"""Exception types shared across the pipeline stages."""


class InvalidInputError(ValueError):
    """Input violates a documented precondition (shape, channels, range)."""


class EmptyInputError(InvalidInputError):
    """An operation that needs foreground pixels received none."""


class MalformedSkeletonError(ValueError):
    """Skeleton graph cannot be interpreted as a plant (e.g. no endpoints)."""


class ViewMismatchError(ValueError):
    """Two plant-day records from different camera views were compared."""


class ManifestError(ValueError):
    """Dataset manifest is unreadable or violates its invariants."""
