"""Per-segment feature extraction, the corpus feature matrix, and its filters.

The feature set is the reduced ten-plus-one panel that survives the selection
pipeline: the three singularity-spectrum features plus eight statistics of
the normalized segment that capture its short-range correlation structure.
All features depend only on the temporal structure, never on the raw scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import mfdfa as _mfdfa
from .errors import (
    AllColumnsDroppedError,
    InsufficientRecordingsError,
    NoModelsError,
    SingularToeplitzError,
    TooShortError,
    ZeroVarianceError,
)
from .signal import MIN_WINDOWS_PER_RECORDING, Segment, TimeSeries, segment, zscore

FEATURE_NAMES = (
    "beta",
    "omega",
    "epsilon",
    "abs_sum_changes",
    "ar_coef_3",
    "ar_coef_4",
    "n_peaks_s1",
    "cwt_peaks_w1",
    "cwt_peaks_w5",
    "pacf_lag3",
    "kurtosis_g2",
)

AR_ORDER = 10


# -- scalar features -----------------------------------------------------------


def abs_sum_changes(values: np.ndarray) -> float:
    """Sum of absolute consecutive changes."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise TooShortError("need at least 2 samples")
    return float(np.sum(np.abs(np.diff(v))))


def _autocovariance(values: np.ndarray, max_lag: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    v = v - v.mean()
    n = v.size
    return np.array([np.dot(v[: n - k], v[k:]) / n for k in range(max_lag + 1)])


def _levinson_durbin(autocov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Yule-Walker solution: (AR coefficients, reflection coefficients)."""
    order = autocov.size - 1
    if autocov[0] <= 0.0:
        raise SingularToeplitzError("zero-variance series has no AR representation")
    phi = np.zeros(order)
    reflect = np.zeros(order)
    err = autocov[0]
    for k in range(1, order + 1):
        acc = autocov[k] - np.dot(phi[: k - 1], autocov[k - 1 : 0 : -1])
        if err <= 0.0:
            raise SingularToeplitzError("degenerate autocovariance sequence")
        rho = acc / err
        prev = phi[: k - 1].copy()
        phi[: k - 1] = prev - rho * prev[::-1]
        phi[k - 1] = rho
        reflect[k - 1] = rho
        err *= 1.0 - rho * rho
    return phi, reflect


def ar_coefficients(values: np.ndarray, order: int = AR_ORDER) -> np.ndarray:
    """AR(order) coefficients by Yule-Walker on the biased autocovariance."""
    v = np.asarray(values, dtype=np.float64)
    if v.size <= order:
        raise TooShortError(f"need more than {order} samples")
    phi, _ = _levinson_durbin(_autocovariance(v, order))
    return phi


def pacf(values: np.ndarray, lag: int = 3) -> float:
    """Partial autocorrelation at the given lag (Levinson-Durbin recursion)."""
    v = np.asarray(values, dtype=np.float64)
    if lag < 1:
        raise ValueError("lag must be >= 1")
    if v.size <= lag + 1:
        raise TooShortError(f"need more than {lag + 1} samples")
    _, reflect = _levinson_durbin(_autocovariance(v, lag))
    return float(reflect[lag - 1])


def count_peaks(values: np.ndarray, support: int = 1) -> int:
    """Peaks strictly greater than all of their `support` neighbors per side."""
    v = np.asarray(values, dtype=np.float64)
    if support < 1:
        raise ValueError("support must be >= 1")
    if v.size < 2 * support + 1:
        raise TooShortError(f"need at least {2 * support + 1} samples")
    core = v[support:-support]
    is_peak = np.ones(core.size, dtype=bool)
    for shift in range(1, support + 1):
        is_peak &= core > v[support - shift : -support - shift]
        right = v[support + shift :]
        is_peak &= core > right[: core.size]
    return int(np.count_nonzero(is_peak))


def ricker_wavelet(width: float, radius: int | None = None) -> np.ndarray:
    """Ricker (Mexican-hat) wavelet sampled at integer offsets |t| <= 10*width."""
    if width <= 0:
        raise ValueError("width must be positive")
    if radius is None:
        radius = int(10 * width)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    norm = 2.0 / (math.sqrt(3.0 * width) * math.pi**0.25)
    return norm * (1.0 - (t / width) ** 2) * np.exp(-(t**2) / (2.0 * width**2))


def cwt_peaks(values: np.ndarray, width: float) -> int:
    """Strict positive local maxima of the Ricker-wavelet response at one width."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 10 * width:
        raise TooShortError(f"need at least {int(10 * width)} samples")
    response = np.convolve(v, ricker_wavelet(width), mode="same")
    inner = response[1:-1]
    peaks = (inner > response[:-2]) & (inner > response[2:]) & (inner > 0.0)
    return int(np.count_nonzero(peaks))


def kurtosis_g2(values: np.ndarray) -> float:
    """Adjusted Fisher-Pearson standardized fourth-moment coefficient."""
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    if n < 4:
        raise TooShortError("need at least 4 samples")
    centered = v - v.mean()
    m2 = float(np.mean(centered**2))
    if m2 == 0.0:
        raise ZeroVarianceError("kurtosis undefined for a constant series")
    g2 = float(np.mean(centered**4)) / (m2 * m2) - 3.0
    return ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0))


# -- per-segment vector and the corpus matrix -----------------------------------


@dataclass(frozen=True)
class FeatureVector:
    user_id: str
    recording_id: str
    segment_index: int
    values: np.ndarray  # ordered as FEATURE_NAMES

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected {len(FEATURE_NAMES)} features")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature vector contains non-finite entries")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class Rejected:
    """Marker for a segment whose spectrum failed validation."""

    user_id: str
    recording_id: str
    segment_index: int
    reason: _mfdfa.RejectionReason


@dataclass(frozen=True)
class FeatureMatrix:
    """Rectangular feature rows with (user, recording, segment) provenance."""

    values: np.ndarray  # (n_rows, n_features)
    user_ids: tuple[str, ...]
    recording_ids: tuple[str, ...]
    segment_indices: tuple[int, ...]
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != len(self.feature_names):
            raise ValueError("ragged feature matrix")
        n = v.shape[0]
        if not (len(self.user_ids) == len(self.recording_ids) == len(self.segment_indices) == n):
            raise ValueError("provenance columns must match the row count")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "user_ids", tuple(self.user_ids))
        object.__setattr__(self, "recording_ids", tuple(self.recording_ids))
        object.__setattr__(self, "segment_indices", tuple(int(i) for i in self.segment_indices))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def users(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for u in self.user_ids:
            seen.setdefault(u)
        return tuple(seen)

    def rows_for_user(self, user_id: str) -> np.ndarray:
        mask = np.array([u == user_id for u in self.user_ids])
        return self.values[mask]

    def take_rows(self, mask: np.ndarray) -> "FeatureMatrix":
        idx = np.flatnonzero(mask)
        return FeatureMatrix(
            values=self.values[idx],
            user_ids=tuple(self.user_ids[i] for i in idx),
            recording_ids=tuple(self.recording_ids[i] for i in idx),
            segment_indices=tuple(self.segment_indices[i] for i in idx),
            feature_names=self.feature_names,
        )

    def select_columns(self, names: tuple[str, ...]) -> "FeatureMatrix":
        cols = [self.feature_names.index(n) for n in names]
        return FeatureMatrix(
            values=self.values[:, cols],
            user_ids=self.user_ids,
            recording_ids=self.recording_ids,
            segment_indices=self.segment_indices,
            feature_names=tuple(names),
        )

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("user_id,recording_id,segment_index," + ",".join(self.feature_names) + "\n")
            for i in range(self.n_rows):
                row = ",".join(repr(float(x)) for x in self.values[i])
                fh.write(f"{self.user_ids[i]},{self.recording_ids[i]},{self.segment_indices[i]},{row}\n")

    @classmethod
    def from_csv(cls, path: str) -> "FeatureMatrix":
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().strip().split(",")
            if header[:3] != ["user_id", "recording_id", "segment_index"]:
                raise ValueError(f"{path}: not a feature matrix CSV")
            names = tuple(header[3:])
            users, recs, segs, rows = [], [], [], []
            for line in fh:
                parts = line.strip().split(",")
                if not parts or parts == [""]:
                    continue
                users.append(parts[0])
                recs.append(parts[1])
                segs.append(int(parts[2]))
                rows.append([float(x) for x in parts[3:]])
        values = np.asarray(rows, dtype=np.float64) if rows else np.empty((0, len(names)))
        return cls(values, tuple(users), tuple(recs), tuple(segs), names)


def extract_features(
    seg: Segment,
    config: _mfdfa.MfdfaConfig | None = None,
    min_width: float = _mfdfa.DEFAULT_MIN_WIDTH,
) -> FeatureVector | Rejected:
    """Compute the full feature panel for one normalized segment.

    Segments whose singularity spectrum fails validation produce no row.
    """
    v = seg.values
    result = _mfdfa.mfdfa(v, config)
    spectral = _mfdfa.spectrum_features(result, min_width)
    if not spectral.valid:
        return Rejected(
            user_id=seg.user_id,
            recording_id=seg.parent_recording,
            segment_index=seg.segment_index,
            reason=spectral.rejection_reason,
        )
    phi = ar_coefficients(v, AR_ORDER)
    row = np.array(
        [
            spectral.beta,
            spectral.omega,
            spectral.epsilon,
            abs_sum_changes(v),
            phi[2],
            phi[3],
            count_peaks(v, support=1),
            cwt_peaks(v, width=1.0),
            cwt_peaks(v, width=5.0),
            pacf(v, lag=3),
            kurtosis_g2(v),
        ]
    )
    return FeatureVector(
        user_id=seg.user_id,
        recording_id=seg.parent_recording,
        segment_index=seg.segment_index,
        values=row,
    )


def extract_matrix(
    recordings: list[TimeSeries],
    window: int | None = None,
    slide: int | None = None,
    config: _mfdfa.MfdfaConfig | None = None,
) -> tuple[FeatureMatrix, list[Rejected]]:
    """Segment, normalize, and extract features for a whole corpus.

    Recordings shorter than two windows are skipped (counted as one Rejected
    entry with segment_index -1); rejected segments are reported but produce
    no rows.
    """
    vectors: list[FeatureVector] = []
    rejected: list[Rejected] = []
    for rec in recordings:
        w = window if window is not None else len(rec) // 10
        if len(rec) < MIN_WINDOWS_PER_RECORDING * w:
            rejected.append(
                Rejected(rec.user_id, rec.recording_id, -1, _mfdfa.RejectionReason.NONE)
            )
            continue
        for seg in segment(rec, window=window, slide=slide):
            normalized = replace(seg, values=zscore(seg.values))
            out = extract_features(normalized, config)
            if isinstance(out, Rejected):
                rejected.append(out)
            else:
                vectors.append(out)
    if not vectors:
        matrix = FeatureMatrix(np.empty((0, len(FEATURE_NAMES))), (), (), ())
        return matrix, rejected
    matrix = FeatureMatrix(
        values=np.stack([fv.values for fv in vectors]),
        user_ids=tuple(fv.user_id for fv in vectors),
        recording_ids=tuple(fv.recording_id for fv in vectors),
        segment_indices=tuple(fv.segment_index for fv in vectors),
    )
    return matrix, rejected


# -- column filters and the grouped split ---------------------------------------


def variance_filter(matrix: FeatureMatrix, threshold: float = 0.01) -> FeatureMatrix:
    """Drop columns whose variance on the min-max scaled column is below threshold."""
    v = matrix.values
    lo = v.min(axis=0)
    span = v.max(axis=0) - lo
    scaled = (v - lo) / np.where(span == 0.0, 1.0, span)
    keep = scaled.var(axis=0) >= threshold
    if not np.any(keep):
        raise AllColumnsDroppedError("variance filter removed every feature column")
    return matrix.select_columns(tuple(np.asarray(matrix.feature_names)[keep]))


def correlation_filter(matrix: FeatureMatrix, threshold: float = 0.8) -> FeatureMatrix:
    """Greedily drop the later column of any pair with |Pearson r| above threshold."""
    v = matrix.values
    d = v.shape[1]
    with np.errstate(invalid="ignore"):
        corr = np.corrcoef(v, rowvar=False)
    corr = np.nan_to_num(np.atleast_2d(corr), nan=0.0)
    dropped = np.zeros(d, dtype=bool)
    for j in range(d):
        for i in range(j):
            if not dropped[i] and not dropped[j] and abs(corr[i, j]) > threshold:
                dropped[j] = True
                break
    keep = tuple(np.asarray(matrix.feature_names)[~dropped])
    return matrix.select_columns(keep)


def select_top_features(
    matrix: FeatureMatrix,
    per_pair_forests: dict[tuple[str, str], "object"],
    top_k: int = 10,
) -> tuple[str, ...]:
    """Most prevalent features across the per-pair forests' top-10 importances.

    Each forest votes for its ten most important features; features are then
    ranked by vote count, with summed importance and name order as
    tie-breakers.
    """
    if not per_pair_forests:
        raise NoModelsError("feature selection needs at least one trained pair model")
    names = matrix.feature_names
    prevalence = {n: 0 for n in names}
    weight = {n: 0.0 for n in names}
    for forest in per_pair_forests.values():
        importances = np.asarray(forest.importances)
        if importances.size != len(names):
            raise ValueError("forest importances do not match the feature columns")
        top = np.argsort(-importances, kind="stable")[: min(10, len(names))]
        for col in top:
            prevalence[names[col]] += 1
            weight[names[col]] += float(importances[col])
    ranked = sorted(names, key=lambda n: (-prevalence[n], -weight[n], n))
    return tuple(ranked[: min(top_k, len(names))])


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.6
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


def grouped_split(matrix: FeatureMatrix, spec: SplitSpec) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Per-user recording-grouped train/test split.

    Recordings are shuffled per user with the split seed; the first
    round(train_fraction * count) recordings (at least one on each side) form
    the training side, and all segments follow their recording.
    """
    rng = np.random.default_rng(spec.seed)
    train_mask = np.zeros(matrix.n_rows, dtype=bool)
    row_keys = list(zip(matrix.user_ids, matrix.recording_ids))
    for user in matrix.users():
        recs: dict[str, None] = {}
        for u, r in row_keys:
            if u == user:
                recs.setdefault(r)
        rec_list = list(recs)
        if len(rec_list) < 2:
            raise InsufficientRecordingsError(
                f"user {user!r} has {len(rec_list)} recording(s); need at least 2"
            )
        order = rng.permutation(len(rec_list))
        n_train = int(np.floor(spec.train_fraction * len(rec_list) + 0.5))
        n_train = min(max(n_train, 1), len(rec_list) - 1)
        chosen = {rec_list[i] for i in order[:n_train]}
        for i, (u, r) in enumerate(row_keys):
            if u == user and r in chosen:
                train_mask[i] = True
    return matrix.take_rows(train_mask), matrix.take_rows(~train_mask)
