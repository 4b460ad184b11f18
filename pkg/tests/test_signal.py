import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from breathauth import mfdfa as mf
from breathauth import signal as sig
from breathauth.errors import (
    NonFiniteError,
    TooShortError,
    WindowTooLargeError,
    ZeroVarianceError,
)


class TestNormalize:
    def test_symmetric_three_point_case(self):
        out = sig.normalize_zscore(sig.TimeSeries([1.0, 2.0, 3.0]))
        expected = math.sqrt(1.5)  # (3 - 2) / sqrt(2/3)
        assert out.values == pytest.approx([-expected, 0.0, expected], abs=1e-12)
        assert out.normalized

    def test_constant_series_raises(self):
        with pytest.raises(ZeroVarianceError):
            sig.normalize_zscore(sig.TimeSeries([5.0, 5.0, 5.0]))

    def test_moments_on_synthetic_recording(self, breath_like_recording):
        out = sig.normalize_zscore(breath_like_recording)
        assert len(out) == 15000
        # oracle: recompute the moments directly on the output
        assert abs(float(np.mean(out.values))) < 1e-9
        assert abs(float(np.std(out.values)) - 1.0) < 1e-9

    def test_nonfinite_rejected(self):
        with pytest.raises(NonFiniteError):
            sig.TimeSeries([1.0, np.nan, 2.0])
        with pytest.raises(NonFiniteError):
            sig.zscore(np.array([1.0, np.inf]))

    @given(
        st.lists(
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
            min_size=2,
            max_size=60,
        )
    )
    @settings(max_examples=60, deadline=None)
    def test_idempotent_and_affine_invariant(self, raw):
        values = np.asarray(raw)
        if values.std() < 1e-9:
            return
        once = sig.zscore(values)
        assert np.allclose(sig.zscore(once), once, atol=1e-9)
        # shifting and rescaling the input does not change the output
        assert np.allclose(sig.zscore(3.5 * values + 11.0), once, atol=1e-7)


class TestSegment:
    def test_recording_yields_19_segments(self):
        series = sig.TimeSeries(np.arange(15000, dtype=float))
        segments = sig.segment(series, window=1500, slide=750)
        assert len(segments) == 19
        assert all(len(s) == 1500 for s in segments)

    def test_defaults_match_protocol(self):
        series = sig.TimeSeries(np.arange(15000, dtype=float))
        segments = sig.segment(series)
        assert len(segments) == 19
        assert len(segments[0]) == 1500

    def test_count_formula_small(self):
        series = sig.TimeSeries(np.arange(20, dtype=float))
        assert len(sig.segment(series, window=2, slide=1)) == 19

    def test_identity_case(self):
        series = sig.TimeSeries(np.arange(10, dtype=float))
        out = sig.segment(series, window=10, slide=5)
        assert len(out) == 1
        assert np.array_equal(out[0].values, series.values)

    def test_window_too_large(self):
        with pytest.raises(WindowTooLargeError):
            sig.segment(sig.TimeSeries(np.arange(10.0)), window=11, slide=5)

    def test_segment_contents_and_indices(self):
        series = sig.TimeSeries(np.arange(100, dtype=float), user_id="u1", recording_id="r1")
        segments = sig.segment(series, window=10, slide=5)
        for k, s in enumerate(segments):
            assert s.segment_index == k
            assert s.user_id == "u1"
            assert s.parent_recording == "r1"
            assert np.array_equal(s.values, series.values[k * 5 : k * 5 + 10])

    def test_every_sample_in_one_or_two_segments(self):
        n = 15000
        series = sig.TimeSeries(np.arange(n, dtype=float))
        coverage = np.zeros(n, dtype=int)
        for s in sig.segment(series):
            k = s.segment_index
            coverage[k * 750 : k * 750 + 1500] += 1
        assert coverage.min() == 1
        assert coverage.max() == 2


class TestShuffleSurrogate:
    def test_preserves_multiset_and_moments(self, breath_like_recording):
        out = sig.shuffle_surrogate(breath_like_recording, seed=5)
        assert np.array_equal(np.sort(out.values), np.sort(breath_like_recording.values))
        # moments are multiset statistics: bit-identical once summation order
        # is fixed by sorting, and equal to float precision either way
        a, b = np.sort(out.values), np.sort(breath_like_recording.values)
        for moment in (np.mean, np.std, lambda v: float(((v - v.mean()) ** 4).mean())):
            assert moment(a) == moment(b)
        assert np.mean(out.values) == pytest.approx(np.mean(breath_like_recording.values), abs=1e-12)
        assert np.std(out.values) == pytest.approx(np.std(breath_like_recording.values), abs=1e-12)

    def test_deterministic_per_seed(self, breath_like_recording):
        a = sig.shuffle_surrogate(breath_like_recording, seed=9)
        b = sig.shuffle_surrogate(breath_like_recording, seed=9)
        c = sig.shuffle_surrogate(breath_like_recording, seed=10)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_destroys_spectrum_width(self, breath_like_recording):
        # qualitative target: shuffling kills correlation-induced multifractality
        original = sig.normalize_zscore(breath_like_recording)
        surrogate = sig.normalize_zscore(sig.shuffle_surrogate(original, seed=123))
        w_orig = mf.spectrum_features(mf.mfdfa(original)).omega
        w_surr = mf.spectrum_features(mf.mfdfa(surrogate)).omega
        assert w_orig > 0.5
        assert w_surr < 0.3


class TestKsNormality:
    def test_gaussian_calibration(self):
        # Monte Carlo: with fitted moments the test is conservative, so
        # non-rejection at the 1% level should be near-universal.
        passes = 0
        for seed in range(100):
            draws = np.random.default_rng(seed).standard_normal(10000)
            if sig.ks_normality(sig.TimeSeries(draws)).p_value > 0.01:
                passes += 1
        assert passes >= 99

    def test_uniform_rejected(self):
        draws = np.random.default_rng(0).uniform(0.0, 1.0, 10000)
        assert sig.ks_normality(sig.TimeSeries(draws)).p_value < 0.001

    def test_statistic_bounds(self):
        for seed in range(5):
            draws = np.random.default_rng(seed).standard_normal(64)
            res = sig.ks_normality(sig.TimeSeries(draws))
            assert 0.0 <= res.statistic <= 1.0
            assert 0.0 <= res.p_value <= 1.0

    def test_too_short(self):
        with pytest.raises(TooShortError):
            sig.ks_normality(sig.TimeSeries(np.arange(7.0)))


class TestCsvRoundTrip:
    def test_recording_round_trip(self, tmp_path):
        series = sig.TimeSeries(
            np.random.default_rng(0).standard_normal(64),
            user_id="u7",
            recording_id="rec03",
            sample_rate_hz=10000.0,
        )
        path = tmp_path / "u7" / "rec03.csv"
        sig.save_recording(series, str(path))
        loaded = sig.load_recording(str(path))
        assert np.array_equal(loaded.values, series.values)
        assert loaded.sample_rate_hz == series.sample_rate_hz
        assert loaded.user_id == "u7"
        assert loaded.recording_id == "rec03"

    def test_dataset_layout(self, tmp_path):
        rng = np.random.default_rng(1)
        recs = [
            sig.TimeSeries(rng.standard_normal(32), user_id=u, recording_id=r)
            for u in ("alice", "bob")
            for r in ("rec00", "rec01")
        ]
        sig.write_dataset(str(tmp_path / "data"), recs)
        loaded = sig.load_dataset(str(tmp_path / "data"))
        assert [(r.user_id, r.recording_id) for r in loaded] == [
            ("alice", "rec00"),
            ("alice", "rec01"),
            ("bob", "rec00"),
            ("bob", "rec01"),
        ]

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0\n2.0\n")
        with pytest.raises(ValueError):
            sig.load_recording(str(path))
