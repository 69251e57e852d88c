import math

import numpy as np
import pytest

from bigjump import dist, renewal

from oracles import renewal_oracle


@pytest.fixture(scope="module")
def law():
    return dist.make_shifted_pareto(3, 1, 1)


@pytest.fixture(scope="module")
def table(law):
    return renewal.tabulate(law, renewal.default_grid(extent=25), reps=50_000, rng=11)


@pytest.fixture(scope="module")
def oracle(law):
    xs = [0.0, 2.0, 5.0]
    zs = [0.0, 3.0, 5.0, 20.0]
    return xs, zs, *renewal_oracle(law, xs, zs, K=800)


def test_boundary_values_exact(table):
    assert table.U.values[0] == 1.0 and table.U.stderr[0] == 0.0
    assert table.V.values[0] == 1.0 and table.V.stderr[0] == 0.0
    assert table.U(-1.0) == 0.0 and table.V(-0.5) == 0.0
    assert table.U(0.0) == 1.0


def test_monotone_pathwise(table):
    assert np.all(np.diff(table.U.values) >= 0)
    assert np.all(np.diff(table.V.values) >= 0)
    assert table.V.values[-1] <= table.V_bound


def test_truncation_rule_records(table):
    for est in (table.U, table.V):
        assert est.K >= renewal.DEFAULT_K
        tail = est.terms[est.K // 10 :].sum()
        assert tail < renewal.TRUNCATION_TOL * (1 + est.terms.sum()) or est.K >= renewal.MAX_K


def test_against_lattice_oracle(table, oracle):
    xs, zs, U, V = oracle
    for x, u in zip(xs, U):
        i = int(np.searchsorted(table.grid, x))
        assert abs(table.U.values[i] - u) <= 4 * table.U.stderr[i] + 0.02 * u
    for z, v in zip(zs, V):
        i = int(np.searchsorted(table.grid, z))
        assert abs(table.V.values[i] - v) <= 4 * table.V.stderr[i] + 0.01 * v


def test_K_doubling_stable(law):
    a = renewal.estimate_U(law, [2.0], K=200, reps=100_000, rng=12, auto=False)
    b = renewal.estimate_U(law, [2.0], K=400, reps=100_000, rng=13, auto=False)
    assert a.values[0] > 1
    assert abs(a.values[0] - b.values[0]) <= 3 * math.hypot(a.stderr[0], b.stderr[0])
    a = renewal.estimate_V(law, [3.0], K=200, reps=100_000, rng=14, auto=False)
    b = renewal.estimate_V(law, [3.0], K=400, reps=100_000, rng=15, auto=False)
    assert abs(a.values[0] - b.values[0]) <= 3 * math.hypot(a.stderr[0], b.stderr[0])


def test_explicit_K_disables_auto(law):
    est = renewal.estimate_U(law, [1.0], K=50, reps=2000, rng=1)
    assert est.K == 50


def test_csv_schema(table):
    lines = table.to_csv().splitlines()
    header = [l for l in lines if l.startswith("#")]
    assert any("beta" in l for l in header) and any("seed" in l for l in header)
    assert lines[len(header)] == "x,U,U_stderr,z,V,V_stderr"
    assert len(lines) == len(header) + 1 + table.grid.size


def test_D(law):
    D = renewal.estimate_D(law, reps=50_000, rng=16)
    assert D.terms[0] == pytest.approx(0.064, rel=1e-12)
    # the exchangeable-max identity is exact for k = 1, and regularly varying terms decay like k^-beta
    k = np.arange(1, D.K + 1)
    tail = D.terms[100:] * k[100:] ** 3
    assert np.std(tail) / np.mean(tail) < 0.1
    assert D.tail_exponent == pytest.approx(3, abs=0.3)
    D2 = renewal.estimate_D(law, K=2 * D.K, reps=50_000, rng=16)
    assert abs(D2.value - D.value) <= D.tail_bound + 4 * D.stderr
    assert D.value == pytest.approx(0.1200, abs=0.002)


def test_laplace_large_lambda(law, table):
    lc = renewal.laplace_K(law, 50.0, table, reps=20_000, rng=17)
    assert 50 * lc.K1_integral == pytest.approx(1, abs=0.05)
    assert 50 * lc.K2_integral == pytest.approx(1, abs=0.05)
    assert 50 * lc.K1_series == pytest.approx(1, abs=0.05)
    assert 50 * lc.K2_series == pytest.approx(1, abs=0.05)


def test_laplace_two_routes(law, table):
    for lc in renewal.laplace_K(law, [0.5, 1.0, 2.0], table, reps=50_000, rng=18):
        assert lc.z_score(1) <= 3.5 and lc.z_score(2) <= 3.5


def test_laplace_rejects_short_grid(law):
    short = renewal.tabulate(law, np.linspace(0, 2, 41), K=50, reps=2000, rng=19)
    with pytest.raises(ValueError, match="extend to"):
        renewal.laplace_K(law, 0.5, short, reps=2000, rng=1)


def test_laplace_rejects_bad_lambda(law, table):
    with pytest.raises(ValueError):
        renewal.laplace_K(law, 0.0, table)


def test_asymptotic_ratio_checks(law, table):
    D = renewal.estimate_D(law, reps=20_000, rng=20)
    recs = renewal.asymptotic_ratio_checks(law, [100], 0.0, 1.0, D, table, reps=50_000, rng=21)
    by = {r.name: r for r in recs}
    assert set(by) == {"asl", "ratio", "ask2", "ask1", "h0", "h1"}
    # x = 0: the Ratio equivalence is 1 by definition, and H0 is the AsK2 event
    assert by["ratio"].ratio == 1.0
    assert by["h0"].lhs == by["ask2"].lhs
    for r in recs:
        assert 0.3 < r.ratio < 3


def test_asymptotic_ratio_checks_validates(law, table):
    D = renewal.estimate_D(law, K=20, reps=1000, rng=1)
    with pytest.raises(ValueError):
        renewal.asymptotic_ratio_checks(law, [200, 100], 0.0, 1.0, D, table)
    with pytest.raises(ValueError):
        renewal.asymptotic_ratio_checks(law, [100], -1.0, 1.0, D, table)
