"""Synthetic breath-like signals with controllable multifractal structure.

Every generator is seed-deterministic, so desk-scale cohorts double as
ground-truth oracles: the cascade multiplier fixes the analytic q-order
scaling exponents, the Hurst parameter fixes the monofractal baseline, and
the per-user AR filter plants a distinct short-range correlation signature.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import BadHurstError, BadLengthError
from .signal import DEFAULT_SAMPLE_RATE_HZ, TimeSeries, write_dataset, zscore

DEFAULT_RECORDING_LENGTH = 15000
_MIN_CASCADE_LEVELS = 10

# Per-recording jitter applied to (a, H): the analogue of breath-to-breath
# nonstationarity. Kept well below the inter-user parameter spacing.
DEFAULT_A_JITTER = 0.01
DEFAULT_H_JITTER = 0.02

# Soft amplitude bound (in standard deviations). Keeps the sample PDF
# compactly supported so shuffled surrogates lose almost all spectrum width.
_SQUASH_SIGMA = 2.5


@dataclass(frozen=True)
class UserGeneratorSpec:
    """Generating parameters for one synthetic user."""

    user_id: str
    cascade_a: float
    hurst: float
    ar_phi: tuple[float, ...] = ()
    noise_mix: float = 0.0
    seed: int = 0
    a_jitter: float = DEFAULT_A_JITTER
    h_jitter: float = DEFAULT_H_JITTER

    def __post_init__(self) -> None:
        if not 0.5 <= self.cascade_a < 0.95:
            raise ValueError("cascade_a must lie in [0.5, 0.95)")
        if not 0.0 < self.hurst < 1.0:
            raise BadHurstError("hurst must lie in (0, 1)")
        if not 0.0 <= self.noise_mix <= 1.0:
            raise ValueError("noise_mix must lie in [0, 1]")


def binomial_cascade(length: int, a: float, seed: int) -> TimeSeries:
    """Multiplicative binomial measure over a dyadic grid.

    At every node the pair (a, 1-a) is assigned to the left/right child in
    random order; the resulting 2**k values conserve total mass 1. a = 0.5
    degenerates to a constant series.
    """
    if length < 2**_MIN_CASCADE_LEVELS or length & (length - 1) != 0:
        raise BadLengthError(f"length must be a power of two >= 2**{_MIN_CASCADE_LEVELS}")
    if not 0.0 < a < 1.0:
        raise ValueError("multiplier a must lie in (0, 1)")
    levels = int(math.log2(length))
    rng = np.random.default_rng(seed)
    mass = np.array([1.0])
    for _ in range(levels):
        flip = rng.random(mass.size) < 0.5
        left = mass * np.where(flip, a, 1.0 - a)
        right = mass * np.where(flip, 1.0 - a, a)
        mass = np.stack([left, right], axis=1).reshape(-1)
    return TimeSeries(values=mass, sample_rate_hz=DEFAULT_SAMPLE_RATE_HZ)


def cascade_hq(q: np.ndarray, a: float) -> np.ndarray:
    """Analytic q-order scaling exponents of the binomial cascade.

    h(q) = 1/q - ln(a**q + (1-a)**q) / (q ln 2), with the continuous limit
    at q = 0.
    """
    q = np.asarray(q, dtype=np.float64)
    out = np.empty_like(q)
    small = np.abs(q) < 1e-12
    qs = np.where(small, 1.0, q)
    out = 1.0 / qs - np.log(a**qs + (1.0 - a) ** qs) / (qs * np.log(2.0))
    limit = -(np.log(a) + np.log(1.0 - a)) / (2.0 * np.log(2.0))
    return np.where(small, limit, out)


def _fgn(n: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    """Fractional Gaussian noise by circulant embedding of the autocovariance."""
    if hurst == 0.5:
        return rng.standard_normal(n)
    k = np.arange(n, dtype=np.float64)
    two_h = 2.0 * hurst
    rho = 0.5 * ((k + 1.0) ** two_h + np.abs(k - 1.0) ** two_h - 2.0 * k**two_h)
    circ = np.concatenate([rho, [0.0], rho[1:][::-1]])
    eig = np.fft.fft(circ).real
    eig[eig < 0.0] = 0.0  # clip floating-point noise
    m = 2 * n
    z = np.zeros(m, dtype=np.complex128)
    z[0] = rng.standard_normal()
    z[n] = rng.standard_normal()
    re = rng.standard_normal(n - 1)
    im = rng.standard_normal(n - 1)
    z[1:n] = (re + 1j * im) / math.sqrt(2.0)
    z[n + 1 :] = np.conj(z[1:n][::-1])
    return (math.sqrt(m) * np.fft.ifft(np.sqrt(eig) * z).real)[:n]


def fgn(length: int, hurst: float, seed: int) -> TimeSeries:
    """Unit-variance fractional Gaussian noise with Hurst parameter H."""
    if not 0.0 < hurst < 1.0:
        raise BadHurstError("hurst must lie in (0, 1)")
    if length < 2:
        raise BadLengthError("length must be >= 2")
    rng = np.random.default_rng(seed)
    return TimeSeries(values=_fgn(length, hurst, rng), sample_rate_hz=DEFAULT_SAMPLE_RATE_HZ)


def synth_recording(
    spec: UserGeneratorSpec,
    length: int = DEFAULT_RECORDING_LENGTH,
    recording_index: int = 0,
) -> TimeSeries:
    """One exhalation-like recording for a user spec.

    A fractional Gaussian carrier is amplitude-modulated by the square root
    of the user's binomial cascade, softly amplitude-bounded, filtered by the
    user's AR coefficients, and mixed with white noise. Recordings of one
    user differ only through the seed stream (including a small seeded jitter
    on a and H).
    """
    rng = np.random.default_rng([spec.seed, recording_index])
    a = float(np.clip(spec.cascade_a + spec.a_jitter * rng.standard_normal(), 0.51, 0.94))
    hurst = float(np.clip(spec.hurst + spec.h_jitter * rng.standard_normal(), 0.05, 0.95))

    levels = max(_MIN_CASCADE_LEVELS, math.ceil(math.log2(length)))
    n_pow2 = 2**levels
    cascade = binomial_cascade(n_pow2, a, int(rng.integers(0, 2**63)))
    envelope = np.sqrt(cascade.values * n_pow2)[:length]
    carrier = _fgn(n_pow2, hurst, rng)[:length]
    core = zscore(carrier * envelope)
    core = _SQUASH_SIGMA * np.tanh(core / _SQUASH_SIGMA)
    if spec.ar_phi:
        core = lfilter([1.0], np.concatenate([[1.0], -np.asarray(spec.ar_phi)]), core)
    core = zscore(core)
    if spec.noise_mix > 0.0:
        core = (1.0 - spec.noise_mix) * core + spec.noise_mix * rng.standard_normal(length)
    return TimeSeries(
        values=core,
        sample_rate_hz=DEFAULT_SAMPLE_RATE_HZ,
        user_id=spec.user_id,
        recording_id=f"rec{recording_index:02d}",
    )


def cohort_specs(
    n_users: int,
    seed: int = 0,
    a_range: tuple[float, float] = (0.60, 0.85),
    h_range: tuple[float, float] = (0.55, 0.85),
    phi_scale: float = 0.45,
    noise_mix: float = 0.05,
) -> list[UserGeneratorSpec]:
    """Distinct user specs on a low-discrepancy (a, H, phi) grid.

    Users are spread over the parameter box with a Kronecker sequence, so
    widening the ranges widens the pairwise separation monotonically.
    """
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    alphas = (math.sqrt(2) - 1, math.sqrt(3) - 1, math.sqrt(5) - 2)
    specs = []
    for i in range(n_users):
        u1 = (0.5 + i * alphas[0]) % 1.0
        u2 = (0.5 + i * alphas[1]) % 1.0
        u3 = (0.5 + i * alphas[2]) % 1.0
        a = a_range[0] + u1 * (a_range[1] - a_range[0])
        hurst = h_range[0] + u2 * (h_range[1] - h_range[0])
        phi1 = phi_scale * (2.0 * u3 - 1.0)
        phi3 = phi_scale * (2.0 * ((u3 + 0.37) % 1.0) - 1.0) * 0.5
        specs.append(
            UserGeneratorSpec(
                user_id=f"user{i:03d}",
                cascade_a=round(a, 6),
                hurst=round(hurst, 6),
                ar_phi=(round(phi1, 6), 0.0, round(phi3, 6)),
                noise_mix=noise_mix,
                seed=seed + 1000 * i,
            )
        )
    return specs


def cohort_recordings(
    specs: list[UserGeneratorSpec],
    recordings_per_user: int = 10,
    length: int = DEFAULT_RECORDING_LENGTH,
) -> list[TimeSeries]:
    """All recordings of a cohort, ordered by (user, recording index)."""
    return [
        synth_recording(spec, length=length, recording_index=r)
        for spec in specs
        for r in range(recordings_per_user)
    ]


def write_cohort(
    root: str,
    specs: list[UserGeneratorSpec],
    recordings_per_user: int = 10,
    length: int = DEFAULT_RECORDING_LENGTH,
) -> None:
    """Write a cohort dataset plus a manifest of the generating parameters."""
    write_dataset(root, cohort_recordings(specs, recordings_per_user, length))
    manifest = {
        "recordings_per_user": recordings_per_user,
        "length": length,
        "users": [asdict(s) for s in specs],
    }
    with open(os.path.join(root, "manifest.json"), "w", encoding="ascii") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
