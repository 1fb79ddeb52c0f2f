"""Exception hierarchy shared across the package.

Validation failures raise subclasses of :class:`AdaptiveLoadError` so the CLI
can map them onto a single exit-code class.
"""


class AdaptiveLoadError(Exception):
    """Base class for all domain errors."""


# --- shapes ---------------------------------------------------------------

class NonDivisibleFrames(AdaptiveLoadError):
    """(frames - 1) is not divisible by the temporal factor."""


class NonDivisibleSpatial(AdaptiveLoadError):
    """Height or width is not divisible by its spatial factor."""


class DuplicateShape(AdaptiveLoadError):
    """Two catalog entries share the same (frames, height, width)."""


class EmptyCatalog(AdaptiveLoadError):
    """A catalog or plan operation received no buckets."""


# --- scheduler / simulator ------------------------------------------------

class PlanMismatch(AdaptiveLoadError):
    """A bucket plan does not cover the catalog being sampled."""


class AllZero(AdaptiveLoadError):
    """Range-ratio CV undefined: all values are zero."""


class ZeroMean(AdaptiveLoadError):
    """std/mean CV undefined: mean is zero."""


# --- cost fitting ---------------------------------------------------------

class InsufficientData(AdaptiveLoadError):
    """Too few trials, or the regressor is constant for every grid exponent."""


class DegenerateFit(AdaptiveLoadError):
    """Observed step times have zero variance; R^2 is undefined."""


class ZeroVariance(AdaptiveLoadError):
    """Correlation or R^2 requested on a constant series."""


class TargetBelowOverhead(AdaptiveLoadError):
    """target_sync does not exceed the fitted fixed overhead a."""


class ZeroSlope(AdaptiveLoadError):
    """Fitted slope b is zero or negative; load bound is undefined."""


class EmptyRecords(AdaptiveLoadError):
    """Bottleneck analysis received no step records."""


# --- fused operator -------------------------------------------------------

class ShapeMismatch(AdaptiveLoadError):
    """Tensor arguments have inconsistent shapes."""


class StaleStats(AdaptiveLoadError):
    """Cached (mu, rstd) do not match the input they claim to describe."""


class InvalidTile(AdaptiveLoadError):
    """Tile sizes violate 1 <= d_tile <= D, 1 <= n_tile <= N."""


class NonFiniteInput(AdaptiveLoadError):
    """Operator input contains NaN or Inf."""
