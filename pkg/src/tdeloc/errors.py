"""Exception types shared across the package.

Every error raised by tdeloc derives from :class:`TdelocError`, so callers
(including the command-line front end) can distinguish library failures from
genuine bugs with a single except clause.
"""


class TdelocError(Exception):
    """Base class for all tdeloc errors."""


# signal synthesis


class DegenerateDelay(TdelocError):
    """All-pass design hit a zero denominator; use a plain integer shift."""


class InvalidCutoff(TdelocError):
    """Low-pass cutoff outside (0, rate/2]."""


class ZeroSignal(TdelocError):
    """Operation needs nonzero signal energy."""


class PulseOutOfRange(TdelocError):
    """Requested pulse (including filter tail) does not fit in the record."""


# peak refinement


class EdgePeak(TdelocError):
    """Peak sits on the first or last sample, so no three-point fit exists."""


class DegenerateSpectrum(TdelocError):
    """Spectral weights sum to (numerically) zero; no phase fit possible."""


# correlation / windowing


class EmptyKernel(TdelocError):
    """Matched-filter kernel has no samples."""


# localization


class RankDeficient(TdelocError):
    """Sensor-pair difference matrix has lower rank than the geometry needs."""


class ZeroSlowness(TdelocError):
    """Slowness vector of zero magnitude cannot be turned into a bearing."""


# scenario / statistics


class EmptySet(TdelocError):
    """Statistics requested over an empty collection."""


# measured-data ingestion


class FormatError(TdelocError):
    """Audio file missing, empty, or not a readable multichannel recording."""


class GeometryMismatch(TdelocError):
    """Channel count disagrees with the sensor coordinate list."""


class NoPeak(TdelocError):
    """Impulse response has no usable direct-path peak."""


class InsufficientPeaks(TdelocError):
    """Fewer separable peaks found than requested."""


class InvalidFactor(TdelocError):
    """Decimation factor must be a positive integer."""


# configuration


class ConfigError(TdelocError):
    """Bad run configuration (unknown key, bad value, missing input)."""
