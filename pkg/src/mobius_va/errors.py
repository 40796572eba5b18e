"""Exception types shared across the package."""


class TruncationError(RuntimeError):
    """A computation needed data that the weight or band truncation discarded.

    ``mass`` carries the discarded tail energy for band truncation, ``index``
    the offending mode or weight for weight truncation.
    """

    def __init__(self, message: str, *, mass: float | None = None, index: int | None = None):
        super().__init__(message)
        self.mass = mass
        self.index = index


class BranchCutError(ValueError):
    """Logarithm requested for a rotation by pi, where the branch is ambiguous."""


class DegenerateFieldError(ValueError):
    """No creation mode of the field produces a nonzero state within the truncation."""


class FitError(ValueError):
    """A diagnostic fit had no usable data."""
