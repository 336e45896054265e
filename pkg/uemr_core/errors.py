"""
Error types shared by the catalogue, geometry and analysis modules.

The CLI maps each family onto a stable exit code (see pipeline.main).
"""


class UemrError(ValueError):
    """Base class for toolkit failures."""


class CatalogueError(UemrError):
    """Input files are missing, malformed or cannot be classified."""


class GeometryError(UemrError):
    """A coordinate transformation failed to converge."""


class AnalysisError(UemrError):
    """An analysis pre-condition does not hold for the supplied data."""
