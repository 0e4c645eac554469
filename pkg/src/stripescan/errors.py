"""Exception taxonomy for the stripescan pipeline.

Every error raised on a contract violation derives from StripescanError so
callers (notably the CLI) can distinguish user/data problems from bugs.
"""


class StripescanError(Exception):
    """Base class for all stripescan errors."""


class ConfigError(StripescanError):
    """Invalid or inconsistent configuration."""


class IoFailure(StripescanError):
    """File could not be read, parsed, or written."""


# --- imagecore ---------------------------------------------------------------

class DegenerateRange(StripescanError):
    """Quantile bounds coincide; the image has (near) zero dynamic range."""


class EmptyFov(StripescanError):
    """FOV mask has fewer than two pixels; statistics are undefined."""


class NoFov(StripescanError):
    """No field of view found above the intensity floor."""


class SliceTooTall(StripescanError):
    """Requested slice height exceeds the vertical extent of the FOV."""


# --- features ----------------------------------------------------------------

class SliceTooSmall(StripescanError):
    """Slice smaller than one HOG block in at least one dimension."""


class SliceTooNarrow(StripescanError):
    """Slice narrower than segment_len + 2R; correlation segments do not fit."""


class SliceTooShort(StripescanError):
    """Slice has no rows left after skipping R rows at top and bottom."""


class LengthMismatch(StripescanError):
    """Descriptor length is not a multiple of the orientation bin count."""


# --- classify ----------------------------------------------------------------

class SingleClass(StripescanError):
    """Operation requires both classes to be present."""


class TooFewRows(StripescanError):
    """Not enough rows to estimate the requested statistics."""


class NotStandardized(StripescanError):
    """Linear SVM invoked without its standardization step."""


class DimensionMismatch(StripescanError):
    """Feature dimension does not match the trained model."""


# --- eval --------------------------------------------------------------------

class TooFewGroups(StripescanError):
    """Fewer distinct groups than requested folds."""


class NoValidFold(StripescanError):
    """No fold contains both classes; aggregation is undefined."""


# --- synth -------------------------------------------------------------------

class BandOutOfFov(StripescanError):
    """Artifact band does not lie within the FOV rows."""
