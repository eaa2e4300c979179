"""Exception hierarchy shared across the package."""


class TechDispatchError(Exception):
    pass


class ConfigurationError(TechDispatchError, ValueError):
    pass


class FeasibilityError(TechDispatchError, ValueError):
    """A decision violates one of the routing constraints."""

    def __init__(self, message, constraint=None):
        super().__init__(message)
        self.constraint = constraint


class ProtocolError(TechDispatchError, ValueError):
    pass


class StructuralError(TechDispatchError, ValueError):
    pass


class InstanceFormatError(TechDispatchError, ValueError):
    pass


class VersionError(TechDispatchError, ValueError):
    pass


class ModelShapeError(TechDispatchError, ValueError):
    pass


class ModelCorruptionError(TechDispatchError, RuntimeError):
    pass


class OracleSizeError(TechDispatchError, ValueError):
    pass
