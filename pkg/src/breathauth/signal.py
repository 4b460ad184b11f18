"""Time-series ingestion, normalization, segmentation, and basic statistical tests.

Recordings live one per CSV file (single column of samples, header row
carrying the sample rate) in a ``dataset/<user_id>/<recording_id>.csv``
layout. All operations are pure functions over immutable inputs.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import kolmogorov, ndtr

from .errors import (
    NonFiniteError,
    TooShortError,
    WindowTooLargeError,
    ZeroVarianceError,
)

DEFAULT_SAMPLE_RATE_HZ = 10000.0

# Recordings shorter than twice the segmentation window are rejected outright
# rather than padded; equal-length segments are required downstream.
MIN_WINDOWS_PER_RECORDING = 2


@dataclass(frozen=True)
class TimeSeries:
    """One recording: raw sensor samples, or a unitless signal once normalized."""

    values: np.ndarray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    user_id: str = ""
    recording_id: str = ""
    normalized: bool = False

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 2:
            raise TooShortError("a time series needs at least 2 samples")
        if not np.all(np.isfinite(v)):
            raise NonFiniteError("time series contains NaN or infinite samples")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class Segment:
    """A windowed slice of a recording, tagged with its provenance."""

    values: np.ndarray
    user_id: str
    parent_recording: str
    segment_index: int

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 2:
            raise TooShortError("a segment needs at least 2 samples")
        if self.segment_index < 0:
            raise ValueError("segment_index must be >= 0")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


def zscore(values: np.ndarray) -> np.ndarray:
    """Center and scale to zero mean and unit population standard deviation."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise TooShortError("need at least 2 samples to normalize")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("cannot normalize non-finite samples")
    sigma = v.std()
    if sigma == 0.0:
        raise ZeroVarianceError("constant series cannot be z-score normalized")
    return (v - v.mean()) / sigma


def normalize_zscore(series: TimeSeries) -> TimeSeries:
    """Return the unitless z-score normalized copy of ``series``."""
    return replace(series, values=zscore(series.values), normalized=True)


def default_window(n: int) -> int:
    """Window size of one tenth of the recording length."""
    return n // 10


def segment(
    series: TimeSeries,
    window: int | None = None,
    slide: int | None = None,
) -> list[Segment]:
    """Split a recording into overlapping equal-length segments.

    Defaults reproduce the acquisition protocol: the window is one tenth of
    the recording and the slide is half a window, so every sample is covered
    by at most two segments. Trailing samples beyond the last full window
    are dropped.
    """
    n = len(series)
    if window is None:
        window = default_window(n)
    if slide is None:
        slide = max(window // 2, 1)
    if window < 1 or slide < 1:
        raise ValueError("window and slide must be positive")
    if window > n:
        raise WindowTooLargeError(f"window {window} exceeds series length {n}")
    count = (n - window) // slide + 1
    out = []
    for k in range(count):
        start = k * slide
        out.append(
            Segment(
                values=series.values[start : start + window].copy(),
                user_id=series.user_id,
                parent_recording=series.recording_id,
                segment_index=k,
            )
        )
    return out


def shuffle_surrogate(series: TimeSeries, seed: int) -> TimeSeries:
    """Random permutation of the samples: same histogram, no temporal order."""
    rng = np.random.default_rng(seed)
    return replace(series, values=rng.permutation(series.values))


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float


def ks_normality(series: TimeSeries) -> KsResult:
    """One-sample Kolmogorov-Smirnov test against a Gaussian fitted by moments.

    The reference distribution uses the sample's own mean and (population)
    standard deviation; the p-value is the asymptotic Kolmogorov tail.
    """
    v = series.values
    n = v.size
    if n < 8:
        raise TooShortError("KS normality check needs at least 8 samples")
    sigma = v.std()
    if sigma == 0.0:
        raise ZeroVarianceError("constant series has no distribution to test")
    cdf = ndtr(np.sort((v - v.mean()) / sigma))
    i = np.arange(1, n + 1, dtype=np.float64)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1.0) / n)
    stat = max(d_plus, d_minus)
    p = float(kolmogorov(math.sqrt(n) * stat))
    return KsResult(statistic=float(stat), p_value=min(max(p, 0.0), 1.0))


# -- CSV dataset layout --------------------------------------------------------

_HEADER_PREFIX = "sample_rate_hz="


def save_recording(series: TimeSeries, path: str) -> None:
    """Write one recording: a header carrying the sample rate, one sample per row."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{_HEADER_PREFIX}{float(series.sample_rate_hz)!r}\n")
        for x in series.values:
            fh.write(f"{float(x)!r}\n")


def load_recording(path: str, user_id: str = "", recording_id: str = "") -> TimeSeries:
    """Read one recording CSV; user/recording ids default to the path layout."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if not header.startswith(_HEADER_PREFIX):
            raise ValueError(f"{path}: missing '{_HEADER_PREFIX}<rate>' header")
        rate = float(header[len(_HEADER_PREFIX) :])
        values = np.array([float(line) for line in fh if line.strip()])
    if not recording_id:
        recording_id = os.path.splitext(os.path.basename(path))[0]
    if not user_id:
        user_id = os.path.basename(os.path.dirname(os.path.abspath(path)))
    return TimeSeries(
        values=values, sample_rate_hz=rate, user_id=user_id, recording_id=recording_id
    )


def write_dataset(root: str, recordings: list[TimeSeries]) -> None:
    """Write recordings under ``root/<user_id>/<recording_id>.csv``."""
    for rec in recordings:
        if not rec.user_id or not rec.recording_id:
            raise ValueError("dataset recordings need user_id and recording_id")
        save_recording(rec, os.path.join(root, rec.user_id, rec.recording_id + ".csv"))


def load_dataset(root: str) -> list[TimeSeries]:
    """Load every recording under ``root``, ordered by (user_id, recording_id)."""
    out = []
    for user in sorted(os.listdir(root)):
        user_dir = os.path.join(root, user)
        if not os.path.isdir(user_dir):
            continue
        for name in sorted(os.listdir(user_dir)):
            if name.endswith(".csv"):
                out.append(load_recording(os.path.join(user_dir, name), user_id=user))
    return out
