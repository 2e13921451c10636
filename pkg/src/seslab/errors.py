"""Exception types shared across the package."""


class SeslabError(Exception):
    """Base class for all seslab errors."""


class ShapeError(SeslabError, ValueError):
    """An array argument has the wrong rank, extent, or pairing."""


class FormatError(SeslabError, ValueError):
    """A file is malformed, truncated, or inconsistent with its header."""


class DegenerateGeometryError(SeslabError, ValueError):
    """A camera/plane/motion combination admits no valid mapping."""


class ConfigError(SeslabError, ValueError):
    """An experiment or CLI configuration is invalid."""
