import numpy as np
import pytest

from breathauth import httest
from breathauth.errors import InsufficientSamplesError, ZeroVarianceError


def _pooled_t_squared(a, b):
    """Independent 1-D oracle: squared pooled two-sample t statistic."""
    n_a, n_b = a.size, b.size
    var_pooled = ((n_a - 1) * a.var(ddof=1) + (n_b - 1) * b.var(ddof=1)) / (n_a + n_b - 2)
    t = (a.mean() - b.mean()) / np.sqrt(var_pooled * (1.0 / n_a + 1.0 / n_b))
    return t * t


class TestHotelling:
    def test_identical_samples_zero_statistic(self):
        rows = np.random.default_rng(0).standard_normal((20, 4))
        res = httest.hotelling_t2(rows, rows.copy())
        assert res.t2 == pytest.approx(0.0, abs=1e-20)
        assert res.p_value == pytest.approx(1.0)

    def test_one_dimensional_reduces_to_t_squared(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            a = rng.standard_normal(30)
            b = rng.standard_normal(25) + 0.4
            res = httest.hotelling_t2(a[:, None], b[:, None])
            assert res.t2 == pytest.approx(_pooled_t_squared(a, b), rel=1e-9)
            assert res.df1 == 1
            assert res.df2 == 53

    def test_null_calibration_at_999(self):
        # Monte Carlo: rejection rate at alpha=0.001 under equal Gaussians
        rng = np.random.default_rng(2)
        rejections = 0
        n_sims = 4000
        for _ in range(n_sims):
            a = rng.standard_normal((100, 10))
            b = rng.standard_normal((100, 10))
            if httest.hotelling_t2(a, b).p_value <= 0.001:
                rejections += 1
        rate = rejections / n_sims
        assert rate == pytest.approx(0.001, abs=0.0015)

    def test_p_values_uniform_under_null(self):
        rng = np.random.default_rng(3)
        p_values = np.array(
            [
                httest.hotelling_t2(rng.standard_normal((40, 3)), rng.standard_normal((40, 3))).p_value
                for _ in range(2000)
            ]
        )
        # KS distance from U(0,1)
        sorted_p = np.sort(p_values)
        grid = np.arange(1, sorted_p.size + 1) / sorted_p.size
        assert np.max(np.abs(sorted_p - grid)) < 0.04

    def test_affine_invariance(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((50, 5))
        b = rng.standard_normal((60, 5)) + 0.3
        transform = rng.standard_normal((5, 5)) + 2.0 * np.eye(5)
        shift = rng.standard_normal(5)
        base = httest.hotelling_t2(a, b)
        moved = httest.hotelling_t2(a @ transform + shift, b @ transform + shift)
        assert moved.t2 == pytest.approx(base.t2, rel=1e-6)
        assert moved.p_value == pytest.approx(base.p_value, rel=1e-6)

    def test_p_monotone_in_statistic(self):
        p_values = [httest.f_sf(f, 10, 189) for f in (0.5, 1.0, 2.0, 4.0, 8.0)]
        assert all(p_values[i] > p_values[i + 1] for i in range(len(p_values) - 1))

    def test_detects_mean_shift(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((100, 10))
        b = rng.standard_normal((100, 10)) + 0.5
        assert httest.hotelling_t2(a, b).p_value < 1e-6

    def test_insufficient_samples(self):
        rng = np.random.default_rng(6)
        with pytest.raises(InsufficientSamplesError):
            httest.hotelling_t2(rng.standard_normal((5, 10)), rng.standard_normal((5, 10)))

    def test_singular_covariance_uses_ridge(self):
        rng = np.random.default_rng(7)
        base = rng.standard_normal((30, 1))
        a = np.hstack([base, base])  # perfectly collinear columns
        b = np.hstack([base + 0.5, base + 0.5])
        res = httest.hotelling_t2(a, b)
        assert res.ridged
        assert np.isfinite(res.t2)


class TestZBox:
    def test_training_mean_accepted(self):
        rng = np.random.default_rng(8)
        train = rng.standard_normal((100, 3))
        assert httest.zbox_classify(train.mean(axis=0), train)

    def test_far_point_rejected(self):
        rng = np.random.default_rng(9)
        train = rng.standard_normal((100, 3))
        point = train.mean(axis=0)
        point[1] += 10.0 * train.std(axis=0)[1]
        assert not httest.zbox_classify(point, train)

    def test_acceptance_region_is_axis_aligned_box(self):
        # oracle: direct |z| <= z_crit comparison over a lattice
        rng = np.random.default_rng(10)
        train = rng.standard_normal((200, 2)) * np.array([1.0, 2.5]) + np.array([3.0, -1.0])
        mu, sigma = train.mean(axis=0), train.std(axis=0)
        from scipy.special import ndtri

        z_crit = ndtri(0.5 + 0.999 / 2.0)
        xs = np.linspace(mu[0] - 5 * sigma[0], mu[0] + 5 * sigma[0], 21)
        ys = np.linspace(mu[1] - 5 * sigma[1], mu[1] + 5 * sigma[1], 21)
        for x in xs:
            for y in ys:
                expected = abs(x - mu[0]) <= z_crit * sigma[0] and abs(y - mu[1]) <= z_crit * sigma[1]
                assert httest.zbox_classify(np.array([x, y]), train) == expected

    def test_batch_agrees_with_scalar(self):
        rng = np.random.default_rng(11)
        train = rng.standard_normal((50, 2))
        points = rng.standard_normal((40, 2)) * 3.0
        batch = httest.zbox_classify_batch(points, train)
        scalar = np.array([httest.zbox_classify(p, train) for p in points])
        assert np.array_equal(batch, scalar)

    def test_zero_variance(self):
        train = np.column_stack([np.ones(10), np.arange(10.0)])
        with pytest.raises(ZeroVarianceError):
            httest.zbox_classify(np.array([1.0, 5.0]), train)
