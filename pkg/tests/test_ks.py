import numpy as np
import pytest
from scipy import stats

from bigjump.rare import ks


def test_unweighted_matches_scipy():
    x = np.random.default_rng(1).normal(0, 1, 500)
    r = ks.weighted_ks(x, None, stats.norm.cdf)
    ref = stats.kstest(x, "norm", method="exact")
    assert r.statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert r.pvalue == pytest.approx(ref.pvalue, rel=1e-6)
    assert r.n_eff == pytest.approx(500)


def test_integer_weights_equal_replication():
    g = np.random.default_rng(2)
    x = g.normal(size=50)
    k = g.integers(1, 4, 50)
    a = ks.weighted_ks(x, k.astype(float), stats.norm.cdf)
    b = ks.weighted_ks(np.repeat(x, k), None, stats.norm.cdf)
    assert a.statistic == pytest.approx(b.statistic, rel=1e-12)


def test_weighted_ecdf_validation():
    with pytest.raises(ValueError):
        ks.weighted_ecdf([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        ks.weighted_ecdf([1.0, 2.0], [1.0, -1.0])
    v, F = ks.weighted_ecdf([3.0, 1.0, 2.0], [1.0, 1.0, 2.0])
    assert v.tolist() == [1.0, 2.0, 3.0] and F.tolist() == [0.25, 0.75, 1.0]


def test_synthetic_calibration_and_power():
    r = ks.synthetic_checks(0.75, rng=3)
    assert r["calibrated"] and r["rejects_shift"]
    assert r["shifted_pvalue"] < 1e-6


def test_normal_ks_scale():
    x = np.random.default_rng(4).normal(0, np.sqrt(0.75), 5000)
    assert ks.normal_ks(x, np.ones_like(x), 0.75).pvalue > 0.01
    assert ks.normal_ks(x, np.ones_like(x), 2.0).pvalue < 1e-6
