import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from bigjump import dist, walk


@pytest.fixture(scope="module")
def law():
    return dist.make_shifted_pareto(3, 1, 1)


def test_path_basics():
    p = walk.Path(np.array([2.0]), start=1.0)
    assert p.sums.tolist() == [1.0, 3.0]
    p = walk.Path(np.array([1.0, 2.0, 3.0]))
    assert p.centered(1.0).tolist() == [0.0, 2.0, 5.0, 9.0]
    assert p.segment(1, 3).tolist() == [1.0, 3.0, 6.0]
    assert p.segment(3, 1).tolist() == [6.0, 3.0, 1.0]
    assert p.to_csv().splitlines()[0] == "k,S_k"


def test_stats_hand_computed():
    s = walk.stats(walk.Path(np.array([-1.0, 2.0, -3.0])))
    assert (s.L_n, s.M_n, s.final, s.tau, s.tau_n) == (-2.0, 1.0, -2.0, 1, 3)
    s = walk.stats(walk.Path(np.array([1.0, 2.0])))
    assert s.tau is None and s.L_n == 1.0
    s = walk.stats(walk.Path(np.array([-5.0])))
    assert (s.tau, s.tau_n, s.L_n, s.M_n) == (1, 1, -5.0, -5.0)


def test_stats_tau_n_ties_earliest():
    s = walk.stats(walk.Path(np.array([-1.0, 1.0, -1.0])))
    assert s.tau_n == 1


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=40))
@settings(max_examples=200, deadline=None)
def test_stats_invariants(steps):
    steps = np.array(steps)
    s = walk.stats(walk.Path(steps))
    assert s.L_n <= s.final <= s.M_n
    assert (s.tau is not None) == (s.L_n < 0)
    assert s.max_step_value == steps[s.max_step_index - 1]
    # reversed negated path: R_k = S_{n-k} - S_n
    r = walk.stats(walk.Path(-steps[::-1]))
    sums = np.concatenate([[0.0], np.cumsum(steps)])
    assert r.M_n == pytest.approx(sums[:-1].max() - sums[-1], abs=1e-9)
    assert r.L_n == pytest.approx(sums[:-1].min() - sums[-1], abs=1e-9)
    assert r.final == pytest.approx(-sums[-1], abs=1e-9)


def test_simulate_lln_clt(law):
    g = np.random.default_rng(5)
    p = walk.simulate(law, 10_000, rng=g)
    assert p.n == 10_000
    assert abs(p.sums[-1] / 1e4 + 1) < 4 * math.sqrt(0.75 / 1e4)
    finals = np.cumsum(dist.sample(law, g, (2000, 2000)), axis=1)[:, -1]
    z = (finals + 2000) / math.sqrt(2000 * 0.75)
    assert stats.kstest(z, "norm").pvalue >= 0.01


def test_simulate_dual(law):
    g1, g2 = np.random.default_rng(6), np.random.default_rng(6)
    d = walk.simulate_dual(law, 10_000, rng=g1)
    p = walk.simulate(law, 10_000, rng=g2)
    assert np.array_equal(d.steps, -p.steps)
    assert abs(d.sums[-1] / 1e4 - 1) < 4 * math.sqrt(0.75 / 1e4)
    assert d.running_min == d.sums.min()
    a = -dist.sample(law, np.random.default_rng(7), 100_000)
    b = walk.simulate_dual(law, 100_000, rng=np.random.default_rng(8)).steps
    assert stats.ks_2samp(a, b).pvalue >= 0.01


def test_simulate_rejects_empty(law):
    with pytest.raises(ValueError):
        walk.simulate(law, 0)


def test_dual_survival(law):
    assert walk.dual_survival(law, -6.0, 5.0, None, 100, 0).value == 0.0
    hi = walk.dual_survival(law, -5.0 + 50, 5.0, None, 20_000, 1)
    assert hi.value >= 0.999
    r = walk.dual_survival(law, 0.0, 5.0, None, 50_000, 2)
    assert 0 < r.value < 1
    m = r.info["horizon"]
    r2 = walk.dual_survival(law, 0.0, 5.0, 2 * m, 50_000, 2)
    assert abs(r2.value - r.value) <= 2 * math.hypot(r.stderr, r2.stderr) + 1e-12


def test_dual_survival_monotone_crn(law):
    ds = walk.DualSurvival(law, 20_000, 3, 256)
    ys = np.linspace(-5, 5, 41)
    p, _ = ds.curve(ys, 5.0)
    assert np.all(np.diff(p) >= 0)
    p2, _ = ds.curve(ys, 6.0)
    assert np.all(p2 >= p)
    before = ds.curve(ys, 5.0)[0]
    ds.extend(512)
    assert np.all(ds.curve(ys, 5.0)[0] <= before)


def test_survival_curve(law):
    p, se = walk.survival_curve(law, 5.0, 30, 20_000, 4)
    assert p[0] == 1.0 and p.size == 31
    # steps are >= -1.5, so three steps cannot cross -5
    assert np.all(p[1:4] == 1.0)
    assert np.all(np.diff(p) <= 0)
