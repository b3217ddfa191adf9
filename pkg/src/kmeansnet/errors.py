"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions disagree with the model or with each other."""


class CapacityError(ValueError):
    """A request exceeds what the data or an exhaustive search can supply."""


class DegeneracyError(ValueError):
    """The data has too few distinct rows for the requested number of clusters."""


class IDXFormatError(ValueError):
    """Malformed or inconsistent IDX container."""


class TrainingError(RuntimeError):
    """Training produced a non-finite loss."""
