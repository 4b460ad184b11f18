"""Exception types shared across the package."""


class BreathAuthError(Exception):
    """Base class for all package errors."""


# -- signal ------------------------------------------------------------------

class NonFiniteError(BreathAuthError):
    """Input contains NaN or infinite samples."""


class ZeroVarianceError(BreathAuthError):
    """Operation requires non-zero variance."""


class TooShortError(BreathAuthError):
    """Series shorter than the operation's minimum length."""


class WindowTooLargeError(BreathAuthError):
    """Segmentation window exceeds the series length."""


# -- mfdfa -------------------------------------------------------------------

class DegenerateScaleRangeError(BreathAuthError):
    """Fewer than four usable scales for the fluctuation regression."""


class EmptySpectrumError(BreathAuthError):
    """Singularity spectrum has too few points to extract features."""


# -- features ----------------------------------------------------------------

class SingularToeplitzError(BreathAuthError):
    """Autocovariance matrix is singular; AR/PACF coefficients undefined."""


class AllColumnsDroppedError(BreathAuthError):
    """A feature filter removed every column."""


class NoModelsError(BreathAuthError):
    """Feature selection requires at least one trained pairwise model."""


class InsufficientRecordingsError(BreathAuthError):
    """Grouped splitting needs at least two recordings per user."""


# -- learn -------------------------------------------------------------------

class EmptyDataError(BreathAuthError):
    """Training data is empty."""


class ClassTooSmallError(BreathAuthError):
    """A class has fewer samples than the number of CV folds."""


class EmptyGridError(BreathAuthError):
    """Hyperparameter grid contains no candidate points."""


# -- httest ------------------------------------------------------------------

class SingularCovarianceError(BreathAuthError):
    """Pooled covariance is not invertible even with the ridge fallback."""


class InsufficientSamplesError(BreathAuthError):
    """Too few samples for the requested multivariate test."""


# -- library -----------------------------------------------------------------

class DuplicateUserError(BreathAuthError):
    """User is already enrolled."""


class VersionMismatchError(BreathAuthError):
    """Library file was written by an unsupported format version."""


class CorruptFileError(BreathAuthError):
    """Library file fails checksum or structural validation."""


# -- auth --------------------------------------------------------------------

class UnknownUserError(BreathAuthError):
    """Claimed user is not enrolled."""


class EmptyTestDataError(BreathAuthError):
    """Confirmation requires at least one probe feature row."""


class EmptyLibraryError(BreathAuthError):
    """Identification requires a non-empty model library."""


class LengthMismatchError(BreathAuthError):
    """Prediction vectors to fuse have different lengths."""


class BadWeightsError(BreathAuthError):
    """Fusion weights must lie in [0, 1] and sum to 1."""


# -- synth -------------------------------------------------------------------

class BadLengthError(BreathAuthError):
    """Cascade length must be a power of two with at least 2**10 points."""


class BadHurstError(BreathAuthError):
    """Hurst parameter must lie strictly between 0 and 1."""
