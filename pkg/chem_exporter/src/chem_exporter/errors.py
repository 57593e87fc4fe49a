"""Exception types of the exporter."""


class ExporterError(Exception):
    """Base class; the command line maps these to exit code 2."""


class ChemistryBackendFailure(ExporterError):
    """The chemistry backend is missing, failed to converge, or crashed.

    The message carries the captured backend diagnostics.
    """


class DimensionMismatch(ExporterError):
    pass


class GeometryError(ExporterError):
    """Geometry file missing or malformed."""
