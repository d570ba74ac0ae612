"""Exception types shared across the package."""


class FormatError(ValueError):
    """A binary file (IDX dataset, checkpoint, mask) is malformed.

    Carries the byte offset at which the problem was detected so truncation
    and corruption reports point at the exact spot.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class LayerCollapseError(RuntimeError):
    """A prunable layer has no unpruned connections left."""

    def __init__(self, layer_indices):
        self.layer_indices = list(layer_indices)
        super().__init__(f"layer(s) {self.layer_indices} fully pruned")


class ReportError(RuntimeError):
    """Report emission failed, e.g. a referenced artifact file is missing."""
