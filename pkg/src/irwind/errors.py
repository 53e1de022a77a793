"""Exception hierarchy shared across the package.

Config problems, malformed input data and numerical failures map to
distinct exit codes in the CLI (1, 2 and 3 respectively), so every
exception here subclasses one of the three category bases.
"""


class IRWindError(Exception):
    """Base class for all package errors."""


class ConfigError(IRWindError):
    """Invalid configuration value, grid or mode."""


class DataError(IRWindError):
    """Base class for malformed or degenerate input data."""


class FormatError(DataError):
    """A frame/mask/manifest file is missing, ragged or unparseable."""


class SequenceError(DataError):
    """Sequence-level inconsistency: empty, duplicate timestamps, gaps."""


class DegenerateRangeError(DataError):
    """Constant-temperature frame: min-max normalization undefined."""


class ExtrapolationError(DataError):
    """Query time outside the covered weather-record interval."""


class GeometryError(DataError):
    """Grazing projection: a pixel row's elevation angle is too small."""


class ShapeError(DataError):
    """Array arguments with incompatible shapes."""


class DomainError(DataError):
    """Argument outside the mathematical domain of a density/operator."""


class ZeroDiffError(DataError):
    """Two consecutive intensity frames are identical everywhere."""


class EmptyDatasetError(DataError):
    """No selected velocity vectors available in the lag buffer."""


class EmptyLayerError(DataError):
    """A cluster/layer has no assigned support."""


class NumericalFailure(IRWindError):
    """Base class for numerical breakdowns."""


class NumericalError(NumericalFailure):
    """Non-finite objective, singular matrix after jitter, underflow."""


class SolverError(NumericalFailure):
    """QP solver failed to reach its stopping criterion."""
