import math

import numpy as np
import pytest

from bigjump import dist
from bigjump.rare import importance as im
from bigjump.streams import Stream

from oracles import event_probability


@pytest.fixture(scope="module")
def law():
    return dist.make_shifted_pareto(3, 1, 1)


def test_event_validation():
    with pytest.raises(ValueError):
        im.EventSpec(10, 3.0, -3.0)
    with pytest.raises(ValueError):
        im.EventSpec(10, 3.0, -5.0)
    with pytest.raises(ValueError):
        im.EventSpec(0, 3.0, 0.0)
    with pytest.raises(ValueError):
        im.EventSpec(10, -1.0, 0.0)
    with pytest.raises(ValueError):
        im.EventSpec(10, 3.0, 4.0, side="max")
    im.EventSpec(10, 3.0, -10.0, window=-2.0)


def test_indicator():
    ev = im.EventSpec(3, 1.0, 0.5)
    sums = np.array([[0.5, -0.5, 0.2], [0.5, -1.5, 0.2], [0.5, 1.0, 0.6]])
    assert ev.indicator(sums).tolist() == [True, False, False]
    mx = im.EventSpec(3, 1.0, 0.0, side="max")
    assert mx.indicator(sums).tolist() == [True, True, False]


def test_one_step_closed_form(law):
    ev = im.EventSpec(1, 0.0, 1e9)
    r = im.naive_event_prob(law, ev, 400_000, 1)
    assert abs(r.value - 0.064) <= 4 * r.stderr


def test_infeasible_certificate(law):
    # n steps of at least -1.5 cannot end below -1.5 n
    ev = im.EventSpec(4, 100.0, -7.0)
    r = im.naive_event_prob(law, ev, 1000, 1)
    assert r.value == 0.0 and "infeasible" in r.flags
    assert r.info["certificate"]["lowest_reachable"] == -6.0


def test_config(law):
    cfg = im.default_config(law, 100, 5.0, pilot_reps=5000, rng=1)
    assert cfg.jump_threshold == 50.0
    assert cfg.prior.sum() == pytest.approx(1.0)
    assert np.all(cfg.prior > 0)
    # survival prior is nonincreasing and starts flat (three steps cannot cross -5)
    assert np.all(np.diff(cfg.prior) <= 1e-15)
    assert cfg.prior[0] == cfg.prior[3]
    u = im.default_config(law, 100, 5.0, prior="uniform")
    assert np.allclose(u.prior, 1 / 20)
    assert im.default_config(law, 5, 5.0, prior="uniform").J_max == 5
    with pytest.raises(ValueError):
        im.ISConfig(0, 1.0)
    with pytest.raises(ValueError):
        im.ISConfig(3, 1.0, 0.0)
    with pytest.raises(ValueError):
        im.ISConfig(3, 1.0, prior=[1.0, 0.0, 1.0])


def test_eps_one_matches_naive(law):
    ev = im.EventSpec(12, 3.0, 0.0)
    cfg = im.ISConfig(12, 6.0, 1.0)
    g1, g2 = Stream(5).generator(), Stream(5).generator()
    s1, lw = im.draw_proposal(law, 12, cfg, g1, 1000)
    s2, _ = im.draw_proposal(law, 12, None, g2, 1000)
    assert np.array_equal(s1, s2)
    assert np.all(lw == 0)
    a = im.is_event_prob(law, ev, cfg, 50_000, 3)
    b = im.naive_event_prob(law, ev, 50_000, 3)
    assert a.value == b.value


def test_weights_bounded(law):
    cfg = im.default_config(law, 50, 3.0, eps=0.05, pilot_reps=2000)
    _, lw = im.draw_proposal(law, 50, cfg, Stream(1).generator(), 20_000)
    assert np.all(np.exp(lw) <= 1 / 0.05 + 1e-9)
    assert np.all(np.isfinite(lw))


def test_unbiased_expectation_of_one(law):
    # E_q[w] = 1 for any proposal
    cfg = im.default_config(law, 30, 2.0, pilot_reps=2000)
    r = im.is_expectation(law, 30, lambda st, s: np.ones(len(st)), cfg, 200_000, 2, ess_floor=0)
    assert abs(r.value - 1) <= 4 * r.stderr


def test_is_vs_lattice_small_n(law):
    p = event_probability(law, 12, 3.0, 0.0, h=0.005)
    cfg = im.default_config(law, 12, 3.0, rng=1)
    r = im.is_event_prob(law, im.EventSpec(12, 3.0, 0.0), cfg, 400_000, 7)
    assert abs(r.value - p) <= 4 * r.stderr + 0.005 * p


def test_low_ess_flag(law):
    cfg = im.default_config(law, 12, 3.0, rng=1)
    r = im.is_event_prob(law, im.EventSpec(12, 3.0, 0.0), cfg, 300, 1)
    assert "low_ess" in r.flags and not r.reliable


def test_weighted_samples_event_exact(law):
    ev = im.EventSpec(8, 3.0, 0.0)
    cfg = im.default_config(law, 8, 3.0, pilot_reps=2000)
    ws = im.weighted_samples(law, ev, cfg, 2000, 4)
    assert len(ws) == 2000
    for s in ws:
        if s.event_indicator:
            sums = s.path.sums[1:]
            assert sums.min() >= -3.0 and sums[-1] <= 0.0
        assert s.weight > 0


def test_determinism_across_workers(law):
    ev = im.EventSpec(20, 3.0, 0.0)
    cfg = im.default_config(law, 20, 3.0, pilot_reps=2000)
    a = im.is_event_prob(law, ev, cfg, 600_000, 9, workers=1)
    b = im.is_event_prob(law, ev, cfg, 600_000, 9, workers=3)
    assert a.value == b.value and a.stderr == b.stderr


def test_event_monotone_in_T_and_x(law):
    # common random numbers: nested events give nested counts
    r = [im.naive_event_prob(law, im.EventSpec(10, x, T), 50_000, 3).value
         for x, T in [(3.0, 0.0), (3.0, -1.0), (2.0, -1.0)]]
    assert r[0] >= r[1] >= r[2]
