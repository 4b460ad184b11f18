"""Two-sample Hotelling T-squared test and the per-dimension z-box classifier.

The T-squared statistic compares two multivariate sample means under a pooled
covariance; its null distribution maps to an F distribution whose upper tail
is evaluated through the regularized incomplete beta function. The z-box
classifier is the axis-aligned acceptance region used for decision-boundary
visualizations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, ndtri

from .errors import InsufficientSamplesError, SingularCovarianceError, ZeroVarianceError

_RIDGE_FACTOR = 1e-10


@dataclass(frozen=True)
class HotellingResult:
    t2: float
    f_stat: float
    df1: int
    df2: int
    p_value: float
    ridged: bool = False  # pooled covariance needed the ridge fallback


def _as_sample(rows) -> np.ndarray:
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 2:
        raise InsufficientSamplesError("each sample needs at least 2 rows")
    return x


def f_sf(f: float, df1: int, df2: int) -> float:
    """Upper tail of the F(df1, df2) distribution via the incomplete beta."""
    if f <= 0.0:
        return 1.0
    return float(betainc(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * f)))


def hotelling_t2(sample_a, sample_b) -> HotellingResult:
    """Equality-of-means test between two d-dimensional samples."""
    a = _as_sample(sample_a)
    b = _as_sample(sample_b)
    if a.shape[1] != b.shape[1]:
        raise ValueError("samples must share the feature dimension")
    n_a, d = a.shape
    n_b = b.shape[0]
    dof = n_a + n_b - 2
    if dof <= d:
        raise InsufficientSamplesError(
            f"need n_a + n_b - 2 > d, got {n_a} + {n_b} - 2 <= {d}"
        )
    diff = a.mean(axis=0) - b.mean(axis=0)
    pooled = ((n_a - 1) * np.cov(a, rowvar=False) + (n_b - 1) * np.cov(b, rowvar=False)) / dof
    pooled = np.atleast_2d(pooled)

    ridged = False
    try:
        solved = np.linalg.solve(pooled, diff)
    except np.linalg.LinAlgError:
        solved = None
    if solved is None or not np.all(np.isfinite(solved)):
        ridged = True
        ridge = _RIDGE_FACTOR * np.trace(pooled) / d
        if ridge <= 0.0:
            raise SingularCovarianceError("pooled covariance has no positive diagonal mass")
        try:
            solved = np.linalg.solve(pooled + ridge * np.eye(d), diff)
        except np.linalg.LinAlgError:
            raise SingularCovarianceError("pooled covariance singular even with ridge")

    t2 = float((n_a * n_b) / (n_a + n_b) * diff @ solved)
    t2 = max(t2, 0.0)
    df1 = d
    df2 = n_a + n_b - d - 1
    f_stat = t2 * df2 / (d * dof)
    return HotellingResult(
        t2=t2,
        f_stat=float(f_stat),
        df1=df1,
        df2=df2,
        p_value=f_sf(float(f_stat), df1, df2),
        ridged=ridged,
    )


def zbox_classify(point, training, confidence: float = 0.999) -> bool:
    """Accept iff every dimension passes a two-sided z-test against training.

    The acceptance region is an axis-aligned box of half-width
    z_crit * sigma around the training mean.
    """
    x = np.asarray(point, dtype=np.float64).ravel()
    train = _as_sample(training)
    if x.size != train.shape[1]:
        raise ValueError("point dimension must match the training columns")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie strictly between 0 and 1")
    mu = train.mean(axis=0)
    sigma = train.std(axis=0)
    if np.any(sigma == 0.0):
        raise ZeroVarianceError("a training dimension is constant")
    z_crit = float(ndtri(0.5 + confidence / 2.0))
    return bool(np.all(np.abs(x - mu) <= z_crit * sigma))


def zbox_classify_batch(points, training, confidence: float = 0.999) -> np.ndarray:
    """Vectorized zbox_classify over rows; returns a boolean array."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    train = _as_sample(training)
    mu = train.mean(axis=0)
    sigma = train.std(axis=0)
    if np.any(sigma == 0.0):
        raise ZeroVarianceError("a training dimension is constant")
    z_crit = float(ndtri(0.5 + confidence / 2.0))
    return np.all(np.abs(pts - mu) <= z_crit * sigma, axis=1)
