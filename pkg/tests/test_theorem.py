import numpy as np
import pytest

from bigjump import dist, renewal
from bigjump.rare import importance as im
from bigjump.rare import theorem


@pytest.fixture(scope="module")
def law():
    return dist.make_shifted_pareto(3, 1, 1)


@pytest.fixture(scope="module")
def table(law):
    return renewal.tabulate(law, renewal.default_grid(extent=25), reps=30_000, rng=31)


def test_integral_weights_exact_on_affine(table):
    f = 2.0 + 3.0 * table.grid
    for upper in (0.0, 1.234, 5.0, 10.02):
        w = theorem.integral_weights(table.U, upper)
        assert w @ f == pytest.approx(2 * upper + 1.5 * upper**2, rel=1e-12, abs=1e-12)
    with pytest.raises(ValueError):
        theorem.integral_weights(table.U, 100.0)


def test_rhs_x0_reduction(law, table):
    ev = im.EventSpec(100, 0.0, 3.0)
    rhs, _, parts = theorem.theorem1_rhs(law, ev, table)
    b = dist.b_n(law, 100).b_n
    assert parts["U_x"] == 1.0
    assert rhs == pytest.approx(b * parts["V_integral"])


def test_rhs_max_side_bounded(law, table):
    # V(-x) saturates at its uniform bound, so the right side stays finite as x grows
    vals = [theorem.theorem1_rhs(law, im.EventSpec(100, x, 0.0, side="max"), table)[2]["V_minus_x"]
            for x in (5.0, 10.0, 20.0)]
    assert np.all(np.diff(vals) >= 0)
    assert vals[-1] <= table.V_bound


def test_theorem1_check_min_side(law, table):
    ev = im.EventSpec(100, 5.0, 0.0)
    (rec,) = theorem.theorem1_check(law, ev, table, reps=200_000, rng=1)
    assert rec.n == 100 and 0.5 < rec.ratio < 2
    lo, hi = rec.ci
    assert lo < rec.ratio < hi
    d = rec.to_dict()
    assert d["event"]["x"] == 5.0 and "ess" in d


def test_theorem1_check_max_side(law, table):
    ev = im.EventSpec(100, 5.0, 0.0, side="max")
    (rec,) = theorem.theorem1_check(law, ev, table, reps=200_000, rng=2)
    assert 0.5 < rec.ratio < 2


def test_local_limit_formula_scaling(law):
    f1 = theorem.local_limit_formula(law, 64, 100.0, 1.0)
    f2 = theorem.local_limit_formula(law, 64, 200.0, 1.0)
    assert f2 / f1 == pytest.approx(2 ** -4, rel=0.05)


def test_local_limit_n1_identity(law):
    # S~_1 = X + a, so P(S~_1 in [x, x + d)) is the step law's local tail at x - a
    (rec,) = theorem.local_limit_check(law, 1, [10.0], 1.0, 2_000_000, 3)
    exact = dist.local_tail(law, 10.0 - law.a, 1.0).exact
    assert abs(rec.lhs - exact) <= 4 * rec.lhs_stderr


def test_local_limit_rejects_small_x(law):
    with pytest.raises(ValueError):
        theorem.local_limit_check(law, 64, [10.0], 1.0, 100, 1)
    with pytest.raises(ValueError):
        theorem.local_limit_check(law, 64, [16.0], 0.0, 100, 1)


def test_local_limit_tracks_scaling(law):
    recs = theorem.local_limit_check(law, 8, [20.0, 30.0], 1.0, 2_000_000, 4)
    # at n = 8 the window sits in the single-jump regime; the ratio is near 1
    for r in recs:
        assert r.lhs > 0
        assert abs(r.ratio - 1) < 0.3 + 3 * r.ratio_stderr
