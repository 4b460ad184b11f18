"""Multifractal detrended fluctuation analysis and singularity-spectrum features.

Follows the standard windowed-detrending procedure: cumulative-sum profile,
non-overlapping windows taken from both ends of the profile, per-window
polynomial detrending, q-order averaging of the mean-square residuals, and a
log-log regression for the q-order scaling exponents. The spectrum features
``(beta, omega, epsilon)`` summarize the resulting singularity spectrum.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .errors import DegenerateScaleRangeError, EmptySpectrumError, TooShortError
from .signal import Segment, TimeSeries

_Q_EPS = 1e-12          # |q| below this uses the q->0 logarithmic-average form
_MEAN_TOL = 1e-6        # normalization check on the input series
_STD_TOL = 1e-3
_BRANCH_TOL = 1e-6      # re-increase tolerance for the fold check
DEFAULT_MIN_WIDTH = 0.05


def default_q_values() -> np.ndarray:
    """q grid from -5 to 5 in steps of 0.25 (q=0 uses the limit form)."""
    return np.round(np.arange(-20, 21) * 0.25, 10)


@dataclass(frozen=True)
class MfdfaConfig:
    q_values: np.ndarray = field(default_factory=default_q_values)
    min_scale: int = 10
    max_scale_fraction: float = 0.25
    n_scales: int = 20
    detrend_order: int = 3

    def __post_init__(self) -> None:
        q = np.asarray(self.q_values, dtype=np.float64)
        if q.size < 3:
            raise ValueError("need at least 3 q values")
        object.__setattr__(self, "q_values", q)
        if self.detrend_order < 1:
            raise ValueError("detrend_order must be >= 1")
        if self.min_scale < self.detrend_order + 2:
            raise ValueError("min_scale must be >= detrend_order + 2")
        if not 0 < self.max_scale_fraction <= 0.5:
            raise ValueError("max_scale_fraction must be in (0, 0.5]")
        if self.n_scales < 4:
            raise ValueError("n_scales must be >= 4")


@dataclass(frozen=True)
class MfdfaResult:
    """Fluctuation functions, scaling exponents, and the singularity spectrum.

    ``hq``, ``tau``, ``alpha``, ``f_alpha`` are aligned with ``q_values``;
    ``fq`` has shape (len(q_values), len(scales)).
    """

    scales: np.ndarray
    q_values: np.ndarray
    fq: np.ndarray
    hq: np.ndarray
    tau: np.ndarray
    alpha: np.ndarray
    f_alpha: np.ndarray


class RejectionReason(enum.Enum):
    NONE = "none"
    NON_CONVEX = "non_convex"
    WIDTH_BELOW_THRESHOLD = "width_below_threshold"


@dataclass(frozen=True)
class SpectrumValidity:
    valid: bool
    reason: RejectionReason


@dataclass(frozen=True)
class SpectrumFeatures:
    beta: float
    omega: float
    epsilon: float
    valid: bool
    rejection_reason: RejectionReason


def _values_of(series) -> np.ndarray:
    if isinstance(series, (TimeSeries, Segment)):
        return series.values
    return np.asarray(series, dtype=np.float64)


def log_spaced_scales(n: int, config: MfdfaConfig) -> np.ndarray:
    """Integer scales, log-spaced between min_scale and floor(n * fraction)."""
    smax = int(n * config.max_scale_fraction)
    if smax <= config.min_scale:
        raise DegenerateScaleRangeError(
            f"max scale {smax} must exceed min scale {config.min_scale}"
        )
    grid = np.geomspace(config.min_scale, smax, config.n_scales)
    scales = np.unique(np.round(grid).astype(np.int64))
    if scales.size < 4:
        raise DegenerateScaleRangeError(f"only {scales.size} usable scales")
    return scales


def mfdfa(series, config: MfdfaConfig | None = None) -> MfdfaResult:
    """Run the full analysis on a z-score normalized series or segment."""
    cfg = config or MfdfaConfig()
    x = _values_of(series)
    n = x.size
    if n < 4 * cfg.min_scale:
        raise TooShortError(f"need at least {4 * cfg.min_scale} samples, got {n}")
    if abs(float(x.mean())) > _MEAN_TOL or abs(float(x.std()) - 1.0) > _STD_TOL:
        raise ValueError("input must be z-score normalized before MFDFA")
    scales = log_spaced_scales(n, cfg)

    profile = np.cumsum(x - x.mean())
    log_msr = []
    kept = []
    for s in scales:
        basis = _kernels.detrend_basis(int(s), cfg.detrend_order)
        msr = _kernels.window_msr(profile, int(s), basis)
        if np.any(msr <= 0.0):
            continue  # exact polynomial fit; scale unusable for negative q
        kept.append(s)
        log_msr.append(np.log(msr))
    if len(kept) < 4:
        raise DegenerateScaleRangeError(f"only {len(kept)} scales with positive residuals")
    scales = np.asarray(kept, dtype=np.int64)

    q = cfg.q_values
    zero = np.abs(q) < _Q_EPS
    qn = np.where(zero, 1.0, q)
    log_fq = np.empty((q.size, scales.size))
    for j, lm in enumerate(log_msr):
        col = (logsumexp(0.5 * np.outer(q, lm), axis=1) - np.log(lm.size)) / qn
        log_fq[:, j] = np.where(zero, 0.5 * lm.mean(), col)

    log_s = np.log(scales.astype(np.float64))
    slopes, _ = np.polyfit(log_s, log_fq.T, 1)
    hq = slopes
    tau = q * hq - 1.0
    alpha = np.gradient(tau, q)
    f_alpha = q * alpha - tau
    return MfdfaResult(
        scales=scales,
        q_values=q,
        fq=np.exp(log_fq),
        hq=hq,
        tau=tau,
        alpha=alpha,
        f_alpha=f_alpha,
    )


def validate_spectrum(
    result: MfdfaResult, min_width: float = DEFAULT_MIN_WIDTH
) -> SpectrumValidity:
    """Reject folded (non-convex) spectra and spectra narrower than min_width.

    A spectrum is single-peaked when f(alpha) is non-increasing moving away
    from its maximum along both branches; any re-increase beyond tolerance is
    a fold.
    """
    f = np.asarray(result.f_alpha, dtype=np.float64)
    a = np.asarray(result.alpha, dtype=np.float64)
    peak = int(np.argmax(f))
    for i in range(peak, f.size - 1):
        if f[i + 1] > f[i] + _BRANCH_TOL:
            return SpectrumValidity(False, RejectionReason.NON_CONVEX)
    for i in range(peak, 0, -1):
        if f[i - 1] > f[i] + _BRANCH_TOL:
            return SpectrumValidity(False, RejectionReason.NON_CONVEX)
    omega = float(a.max() - a.min())
    if omega < min_width:
        return SpectrumValidity(False, RejectionReason.WIDTH_BELOW_THRESHOLD)
    return SpectrumValidity(True, RejectionReason.NONE)


def spectrum_features(
    result: MfdfaResult, min_width: float = DEFAULT_MIN_WIDTH
) -> SpectrumFeatures:
    """Extract (beta, omega, epsilon) and the validity verdict from a spectrum."""
    a = np.asarray(result.alpha, dtype=np.float64)
    f = np.asarray(result.f_alpha, dtype=np.float64)
    if a.size < 5:
        raise EmptySpectrumError("need at least 5 spectrum points")
    beta = float(a[np.argmax(f)])
    a_min, a_max = float(a.min()), float(a.max())
    omega = a_max - a_min
    epsilon = ((a_max - beta) - (beta - a_min)) / omega if omega > 0 else 0.0
    verdict = validate_spectrum(result, min_width)
    return SpectrumFeatures(
        beta=beta,
        omega=omega,
        epsilon=float(epsilon),
        valid=verdict.valid,
        rejection_reason=verdict.reason,
    )


def write_curves_csv(result: MfdfaResult, path: str) -> None:
    """Dump aligned (q, H, tau, alpha, f_alpha) rows for plotting."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("q,hq,tau,alpha,f_alpha\n")
        for i, qi in enumerate(result.q_values):
            row = (qi, result.hq[i], result.tau[i], result.alpha[i], result.f_alpha[i])
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
