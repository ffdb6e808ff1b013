class McgeoError(Exception):
    """Base class; ``kind`` is the tag used in CLI error reports."""

    kind = "error"


class DomainError(McgeoError, ValueError):
    """Input violates a mathematical precondition (reducible chain, zero mass, ...)."""

    kind = "domain"


class ShapeError(McgeoError, ValueError):
    kind = "shape"


class SizeGuardError(DomainError):
    kind = "size_guard"
