"""Benchmarks: identification time vs library size, and kernel backends.

The identification benchmark measures single-threaded wall-clock time per
identification against libraries of growing size and fits a line through
(model count, mean seconds). The kernel benchmark compares the compiled
extension against the NumPy fallback on both hot paths.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .auth import identify
from .features import FeatureMatrix
from .learn import CVConfig, ForestParams, train_forest
from .library import enroll_all

BENCH_GRID = {"n_trees": (30,), "max_depth": (8,)}


def _feature_cohort(n_users: int, rows_per_user: int, d: int, seed: int) -> FeatureMatrix:
    """Gaussian user clusters directly in feature space (no signal stage)."""
    rng = np.random.default_rng(seed)
    values, users, recs = [], [], []
    for u in range(n_users):
        center = rng.standard_normal(d) * 6.0
        for r in range(rows_per_user):
            values.append(center + rng.standard_normal(d))
            users.append(f"user{u:03d}")
            recs.append(f"r{r % 10}")
    return FeatureMatrix(
        values=np.asarray(values),
        user_ids=tuple(users),
        recording_ids=tuple(recs),
        segment_indices=tuple(range(len(users))),
        feature_names=tuple(f"f{i}" for i in range(d)),
    )


@dataclass(frozen=True)
class IdentifyBenchRow:
    n_users: int
    n_models: int
    mean_seconds: float
    ci95_seconds: float
    samples: int


@dataclass(frozen=True)
class IdentifyBenchReport:
    rows: list[IdentifyBenchRow]
    slope: float
    intercept: float
    r_squared: float

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "n_users": r.n_users,
                    "n_models": r.n_models,
                    "mean_seconds": r.mean_seconds,
                    "ci95_seconds": r.ci95_seconds,
                    "samples": r.samples,
                }
                for r in self.rows
            ],
            "slope_seconds_per_model": self.slope,
            "intercept_seconds": self.intercept,
            "r_squared": self.r_squared,
        }


def bench_identify(
    user_counts: list[int],
    rows_per_user: int = 80,
    probe_rows: int = 40,
    repeats: int = 3,
    seed: int = 0,
    d: int = 10,
) -> IdentifyBenchReport:
    """Identification wall time per probe at several library sizes (1 worker)."""
    rows = []
    rng = np.random.default_rng(seed)
    for n_users in user_counts:
        matrix = _feature_cohort(n_users, rows_per_user, d, seed)
        cv = CVConfig(k=4, grid=BENCH_GRID, seed=seed)
        library = enroll_all(matrix, cv, jobs=1)
        times = []
        for rep in range(repeats):
            for user in library.users:
                probe = matrix.rows_for_user(user)[:probe_rows] + 0.1 * rng.standard_normal((probe_rows, d))
                start = time.perf_counter()
                identify(probe, library, "ml")
                times.append(time.perf_counter() - start)
        times_arr = np.asarray(times)
        ci95 = 1.96 * times_arr.std(ddof=1) / math.sqrt(times_arr.size)
        rows.append(
            IdentifyBenchRow(
                n_users=n_users,
                n_models=library.n_models,
                mean_seconds=float(times_arr.mean()),
                ci95_seconds=float(ci95),
                samples=times_arr.size,
            )
        )
    x = np.asarray([r.n_models for r in rows], dtype=np.float64)
    y = np.asarray([r.mean_seconds for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return IdentifyBenchReport(rows=rows, slope=float(slope), intercept=float(intercept), r_squared=r_squared)


def write_identify_csv(report: IdentifyBenchReport, path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("n_users,n_models,mean_seconds,ci95_seconds,samples\n")
        for r in report.rows:
            fh.write(f"{r.n_users},{r.n_models},{r.mean_seconds!r},{r.ci95_seconds!r},{r.samples}\n")


def bench_kernels(repeats: int = 5, seed: int = 0) -> list[dict]:
    """Compiled vs NumPy timings for the two hot kernels.

    Returns one row per (task, backend) with best-of-repeats seconds.
    """
    rng = np.random.default_rng(seed)
    backends = ["numpy"] + (["compiled"] if _kernels.HAVE_COMPILED else [])
    out = []

    # task 1: MFDFA window residuals over the default scale ladder
    for n in (1500, 15000):
        profile = np.cumsum(rng.standard_normal(n))
        scales = np.unique(np.round(np.geomspace(10, n // 4, 20)).astype(int))
        bases = {int(s): _kernels.detrend_basis(int(s), 3) for s in scales}
        for backend in backends:
            with _kernels.use_backend(backend):
                best = math.inf
                for _ in range(repeats):
                    start = time.perf_counter()
                    for s in scales:
                        _kernels.window_msr(profile, int(s), bases[int(s)])
                    best = min(best, time.perf_counter() - start)
            out.append(
                {"task": f"mfdfa_residuals_n{n}", "backend": backend, "seconds": best}
            )

    # task 2: forest training on a pair-sized problem
    X = rng.standard_normal((240, 10))
    y = (X[:, 0] + 0.5 * rng.standard_normal(240) > 0).astype(int)
    for backend in backends:
        with _kernels.use_backend(backend):
            best = math.inf
            for _ in range(repeats):
                start = time.perf_counter()
                train_forest(X, y, ForestParams(n_trees=30, max_depth=8), seed=seed)
                best = min(best, time.perf_counter() - start)
        out.append({"task": "forest_fit_240x10_30trees", "backend": backend, "seconds": best})
    return out
