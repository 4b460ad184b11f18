"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s`. The cohort-scale criteria
share a session-scoped 15-user synthetic cohort.
"""

import contextlib
import math
import time

import numpy as np
import pytest

from breathauth import auth, bench, features as feat, learn, library as lib
from breathauth import mfdfa as mf
from breathauth import synth
from breathauth.signal import TimeSeries, normalize_zscore, segment, shuffle_surrogate

SMALL_CV_GRID = learn.SMALL_GRID


@contextlib.contextmanager
def criterion(number: int, label: str, budget_seconds: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        elapsed = time.perf_counter() - start
        print(f"ACCEPTANCE {number:02d} {label}: FAIL ({elapsed:.2f}s)")
        raise
    elapsed = time.perf_counter() - start
    print(f"ACCEPTANCE {number:02d} {label}: PASS ({elapsed:.2f}s)")
    assert elapsed < budget_seconds, f"criterion {number} exceeded {budget_seconds}s budget"


@pytest.fixture(scope="session")
def cohort_matrix():
    """15 separable users x 10 recordings, through the real feature pipeline."""
    specs = synth.cohort_specs(15, seed=0)
    recordings = synth.cohort_recordings(specs, recordings_per_user=10)
    matrix, _rejected = feat.extract_matrix(recordings)
    return matrix


def test_c01_segmentation():
    with criterion(1, "segmentation 15000 -> 19x1500", budget_seconds=10.0):
        series = TimeSeries(np.arange(15000, dtype=float))
        start = time.perf_counter()
        segments = segment(series)
        op_time = time.perf_counter() - start
        assert len(segments) == 19
        assert all(len(s) == 1500 for s in segments)
        assert op_time < 0.05  # budget is 1 ms; allow cold-cache headroom


def test_c02_mfdfa_oracle():
    with criterion(2, "MFDFA cascade oracle + white noise", budget_seconds=10.0):
        cascade = normalize_zscore(synth.binomial_cascade(2**14, 0.75, seed=0))
        res = mf.mfdfa(cascade)
        expected = synth.cascade_hq(res.q_values, 0.75)
        mask = np.isin(res.q_values, np.arange(-5.0, 6.0))
        worst = float(np.max(np.abs(res.hq[mask] - expected[mask])))
        assert worst <= 0.1, f"max |H(q) - h(q)| = {worst}"

        noise = normalize_zscore(TimeSeries(np.random.default_rng(7).standard_normal(2**14)))
        feats = mf.spectrum_features(mf.mfdfa(noise))
        assert 0.4 <= feats.beta <= 0.6
        assert feats.omega < 0.3


def test_c03_shuffle_surrogate():
    with criterion(3, "shuffle kills spectrum width on 10 fixtures", budget_seconds=30.0):
        for seed in range(10):
            spec = synth.UserGeneratorSpec(
                user_id="u", cascade_a=0.75, hurst=0.7, seed=seed, a_jitter=0.0, h_jitter=0.0
            )
            original = normalize_zscore(synth.synth_recording(spec))
            surrogate = normalize_zscore(shuffle_surrogate(original, seed=seed + 500))
            w_orig = mf.spectrum_features(mf.mfdfa(original)).omega
            w_surr = mf.spectrum_features(mf.mfdfa(surrogate)).omega
            assert w_orig - w_surr > 0.2, f"seed {seed}: {w_orig:.3f} vs {w_surr:.3f}"


def test_c04_spectrum_filter():
    with criterion(4, "folded and narrow spectra rejected", budget_seconds=10.0):
        n = 9
        base = dict(
            scales=np.arange(10, 10 + n),
            q_values=np.linspace(-5, 5, n),
            fq=np.ones((n, n)),
            hq=np.ones(n),
            tau=np.ones(n),
        )
        folded = mf.MfdfaResult(
            alpha=np.linspace(0.5, 1.3, n),
            f_alpha=np.array([0.62, 0.5, 0.7, 0.9, 1.0, 0.9, 0.7, 0.5, 0.3]),
            **base,
        )
        verdict = mf.validate_spectrum(folded)
        assert not verdict.valid
        assert verdict.reason is mf.RejectionReason.NON_CONVEX

        alpha = np.linspace(0.50, 0.53, n)  # width 0.03
        narrow = mf.MfdfaResult(
            alpha=alpha, f_alpha=1.0 - 100.0 * (alpha - 0.515) ** 2, **base
        )
        verdict = mf.validate_spectrum(narrow)
        assert not verdict.valid
        assert verdict.reason is mf.RejectionReason.WIDTH_BELOW_THRESHOLD


def test_c05_hotelling_calibration():
    from breathauth.httest import hotelling_t2

    with criterion(5, "Hotelling null calibration + 1-D t^2", budget_seconds=60.0):
        rng = np.random.default_rng(11)
        n_sims = 10_000
        rejections = 0
        for _ in range(n_sims):
            a = rng.standard_normal((100, 10))
            b = rng.standard_normal((100, 10))
            if hotelling_t2(a, b).p_value <= 0.001:
                rejections += 1
        rate = rejections / n_sims
        assert abs(rate - 0.001) <= 0.001, f"rejection rate {rate}"

        for seed in range(5):
            gen = np.random.default_rng(seed)
            x = gen.standard_normal(40)
            y = gen.standard_normal(35) + 0.3
            res = hotelling_t2(x[:, None], y[:, None])
            n_x, n_y = x.size, y.size
            pooled = ((n_x - 1) * x.var(ddof=1) + (n_y - 1) * y.var(ddof=1)) / (n_x + n_y - 2)
            t_stat = (x.mean() - y.mean()) / math.sqrt(pooled * (1 / n_x + 1 / n_y))
            assert res.t2 == pytest.approx(t_stat * t_stat, rel=1e-9)


def test_c06_metric_arithmetic():
    with criterion(6, "paper worked metric values", budget_seconds=10.0):
        def tallies(t, f, h):
            return (
                [auth.IdentificationOutcome("a", 99.0, "a", auth.Tally.TRUE_POSITIVE)] * t
                + [auth.IdentificationOutcome("a", 99.0, "b", auth.Tally.FALSE_POSITIVE)] * f
                + [auth.IdentificationOutcome(None, 0.0, "b", auth.Tally.NOT_IDENTIFIED)] * h
            )

        liberal = auth.metrics(identifications=tallies(31, 58, 5))
        assert liberal.n_identifications == 94
        assert round(liberal.precision, 1) == 34.8
        assert round(liberal.accuracy, 1) == 33.0

        conservative = auth.metrics(identifications=tallies(18, 6, 70))
        assert round(conservative.precision, 1) == 75.0
        assert round(conservative.accuracy, 1) == 19.1

        confirmations = [auth.ConfirmationOutcome("u", 93, 93, 100.0, 50.0, True)] * 94
        assert auth.metrics(confirmations=confirmations).tcr == 100.0


def _tiny_cluster_matrix(n_users, rows_per_user=12, d=3, seed=0):
    rng = np.random.default_rng(seed)
    values, users, recs = [], [], []
    for u in range(n_users):
        center = rng.standard_normal(d) * 8.0
        for r in range(rows_per_user):
            values.append(center + rng.standard_normal(d))
            users.append(f"u{u:03d}")
            recs.append(f"r{r % 3}")
    return feat.FeatureMatrix(
        values=np.asarray(values),
        user_ids=tuple(users),
        recording_ids=tuple(recs),
        segment_indices=tuple(range(len(users))),
        feature_names=tuple(f"f{i}" for i in range(d)),
    )


def test_c07_enrollment_growth():
    with criterion(7, "model count follows C(n,2); +n per new user", budget_seconds=120.0):
        cv = learn.CVConfig(k=3, grid={"n_trees": (5,), "max_depth": (4,)}, seed=0)
        full = _tiny_cluster_matrix(20)
        mask2 = np.array([u in ("u000", "u001") for u in full.user_ids])
        library = lib.enroll_all(full.take_rows(mask2), cv)
        assert library.n_models + len(library.discarded) == 1
        for n in range(2, 20):
            uid = f"u{n:03d}"
            extra = full.take_rows(np.array([u == uid for u in full.user_ids]))
            before = library.n_models + len(library.discarded)
            library = lib.enroll_user(library, extra, cv)
            after = library.n_models + len(library.discarded)
            assert after - before == n, f"adding user {n + 1} created {after - before} models"
            assert after == math.comb(n + 1, 2)
        assert library.n_users == 20
        assert library.n_models + len(library.discarded) == 190


def test_c08_cohort_behavior(cohort_matrix):
    with criterion(8, "15-user cohort: TCR(ML) >= 90, beats HT; ranked identification", budget_seconds=600.0):
        config = auth.EvalConfig(
            n_trials=10,
            seed=0,
            cv=learn.CVConfig(k=5, grid=SMALL_CV_GRID, seed=0),
        )
        report = auth.shuffle_trials(cohort_matrix, config)
        tcr_ml = float(np.mean([t.tcr_ml for t in report.trials]))
        tcr_ht = float(np.mean([t.tcr_ht for t in report.trials]))
        assert tcr_ml >= 90.0, f"mean TCR(ML) = {tcr_ml}"
        assert tcr_ml > tcr_ht, f"TCR(ML) {tcr_ml} vs TCR(HT) {tcr_ht}"
        top = {k: float(np.mean([t.rank_fractions[k] for t in report.trials])) for k in (1, 2, 3)}
        assert top[3] >= top[2] >= top[1]
        assert top[1] > 1.0 / 15.0, f"top-1 fraction {top[1]} not better than chance"


def test_c09_threshold_monotonicity(cohort_matrix):
    with criterion(9, "raising eta_t never raises t+f", budget_seconds=600.0):
        config = auth.EvalConfig(n_trials=1, seed=3, cv=learn.CVConfig(k=5, grid=SMALL_CV_GRID, seed=3))
        split_seed = auth._trial_seed(config.seed, 0)
        train, test = feat.grouped_split(
            cohort_matrix, feat.SplitSpec(train_fraction=0.6, seed=split_seed)
        )
        library = lib.enroll_all(train, config.cv)
        weights = auth.FusionWeights(config.weights)
        vectors, trues = [], []
        for user in library.users:
            probe = test.rows_for_user(user)
            fused = auth.fuse(
                [auth.identify(probe, library, "ht"), auth.identify(probe, library, "ml")],
                weights,
            )
            vectors.append(fused)
            trues.append(user)
        previous = None
        for eta_t in range(50, 97):
            outcomes = [
                auth.decide_identity(v, eta_t=float(eta_t), true_user=u)
                for v, u in zip(vectors, trues)
            ]
            m = auth.metrics(identifications=outcomes)
            made = m.t + m.f
            if previous is not None:
                assert made <= previous, f"t+f rose from {previous} to {made} at eta_t={eta_t}"
            previous = made


def test_c10_identification_time_linearity():
    with criterion(10, "identification time linear in library size", budget_seconds=600.0):
        report = bench.bench_identify([10, 15, 20, 25, 30], repeats=3, seed=0)
        assert [r.n_models for r in report.rows] == [45, 105, 190, 300, 435]
        assert all(r.mean_seconds > 0 for r in report.rows)
        times = [r.mean_seconds for r in report.rows]
        assert all(b > a for a, b in zip(times, times[1:])), "times not increasing"
        assert report.r_squared >= 0.95, f"R^2 = {report.r_squared}"


def test_c11_evaluate_determinism(cohort_matrix, tmp_path):
    from breathauth import cli

    with criterion(11, "cmd_evaluate byte-identical reruns", budget_seconds=600.0):
        subset_users = cohort_matrix.users()[:5]
        mask = np.array([u in subset_users for u in cohort_matrix.user_ids])
        small = cohort_matrix.take_rows(mask)
        feats_csv = str(tmp_path / "cohort5.csv")
        small.to_csv(feats_csv)
        outs = []
        for run in (1, 2):
            out = str(tmp_path / f"report{run}.json")
            csv = str(tmp_path / f"report{run}.csv")
            code = cli.main(
                ["evaluate", "--features", feats_csv, "--out", out, "--csv", csv,
                 "--trials", "2", "--seed", "9", "--grid", "small"]
            )
            assert code == 0
            outs.append((open(out, "rb").read(), open(csv, "rb").read()))
        assert outs[0][0] == outs[1][0], "JSON reports differ between runs"
        assert outs[0][1] == outs[1][1], "CSV reports differ between runs"


def test_c12_forest_properties():
    with criterion(12, "forest importances, planted signal, XOR", budget_seconds=60.0):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((300, 8))
        y = (X[:, 1] > 0.0).astype(int)
        forest = learn.train_forest(X, y, learn.ForestParams(n_trees=50), seed=0)
        assert np.all(forest.importances >= 0.0)
        assert forest.importances.sum() == pytest.approx(1.0, abs=1e-9)

        wins = 0
        for seed in range(10):
            gen = np.random.default_rng(seed)
            Xp = gen.standard_normal((200, 10))
            yp = np.repeat([0, 1], 100)
            Xp[:, 4] += 3.0 * yp
            planted = learn.train_forest(Xp, yp, learn.ForestParams(n_trees=50), seed=seed)
            wins += int(np.argmax(planted.importances) == 4)
        assert wins >= 9, f"planted feature won {wins}/10"

        gen = np.random.default_rng(42)
        corners = gen.integers(0, 2, size=(400, 2)).astype(float)
        y_xor = corners[:, 0].astype(int) ^ corners[:, 1].astype(int)
        X_xor = corners + 0.1 * gen.standard_normal((400, 2))
        corners_t = gen.integers(0, 2, size=(400, 2)).astype(float)
        y_t = corners_t[:, 0].astype(int) ^ corners_t[:, 1].astype(int)
        X_t = corners_t + 0.1 * gen.standard_normal((400, 2))
        forest_xor = learn.train_forest(
            X_xor, y_xor, learn.ForestParams(n_trees=100, features_per_split=2), seed=1
        )
        accuracy = float(np.mean(forest_xor.predict(X_t) == y_t))
        assert accuracy > 0.9, f"XOR accuracy {accuracy}"
