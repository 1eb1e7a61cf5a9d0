import math
import warnings

import numpy as np
import pytest

from besselfrac.model import type_a, type_b
from besselfrac.probe import (OccupationRecord, ProbeResult, StartWarning,
                              bridge_corrected_hitting, edge_probability,
                              edge_probability_sweep, fit_exponent, joint_edge_probability,
                              joint_edge_sweep, make_result, occupation_sweep, occupation_time,
                              window_hitting_probability, window_hitting_sweep)
from besselfrac.sde import IntegratorConfig

A2 = type_a(2, 0.2)
RS = np.geomspace(0.05, 0.3, 6)

# Crank-Nicolson hitting-PDE oracle (tests/oracles/window_hitting_pde.py):
# type A, N = 2, k = 0.2, r = 0.05, t1 = 0.5, windows of width 0.05, 0.1, 0.2, 0.4
PDE_WIDTHS = (0.05, 0.1, 0.2, 0.4)
PDE_HITTING = (0.110022, 0.157079, 0.221688, 0.303574)
PDE_SLOPE = 0.4890


def test_probe_result_invariants():
    res = make_result(0.1, 7, 50, 1.0, 1.0)
    assert res.p_hat == 7 / 50 and res.ci_low <= res.p_hat <= res.ci_high
    zero = make_result(0.1, 0, 50)
    assert zero.p_hat == 0 and zero.ci_low == 0 and zero.ci_high > 0
    assert set(res.to_dict()) == {"r", "n_samples", "hits", "p_hat", "ci_low", "ci_high",
                                  "t1", "t2"}


def test_edge_probability_saturates():
    res = edge_probability(A2, None, 50.0, n_samples=200, seed=1)
    assert res.p_hat == 1.0 and res.hits == 200


def test_edge_probability_monotone_in_r():
    res = edge_probability_sweep(A2, None, RS, n_samples=2000, seed=2)
    hits = [p.hits for p in res]
    assert hits == sorted(hits)
    # a single-r call reuses the same paths
    assert edge_probability(A2, None, RS[2], n_samples=2000, seed=2).hits == res[2].hits


def test_start_warning_outside_edge_set():
    with pytest.warns(StartWarning):
        edge_probability(A2, (0.0, 1.0), 0.1, n_samples=10, seed=0)


def test_degenerate_window_is_single_time_event():
    win = window_hitting_probability(A2, None, 0.1, 0.5, 0.5, n_samples=1000, seed=3)
    single = edge_probability(A2, None, 0.1, t=0.5, n_samples=1000, seed=3)
    assert win.hits == single.hits


def test_start_outside_ball_never_hits():
    with pytest.warns(StartWarning):
        res = window_hitting_probability(A2, (0.0, 1.0), 2.0, 0.1, 0.5, R=0.5,
                                         n_samples=100, seed=0)
    assert res.hits == 0


def test_window_monotonicity():
    windows = [(0.5, 0.55), (0.5, 0.6), (0.5, 0.8), (0.4, 0.8), (0.2, 0.8)]
    out = window_hitting_sweep(A2, None, [0.02, 0.05, 0.1], windows, R=10.0,
                               n_samples=1500, seed=4)
    for j in range(3):
        hits = [row[j].hits for row in out]
        assert hits == sorted(hits)  # each window contains the previous one
    for row in out:
        assert [p.hits for p in row] == sorted(p.hits for p in row)


def test_finite_radius_reduces_hits():
    free = window_hitting_probability(A2, None, 0.1, 0.2, 1.0, R=math.inf, n_samples=1500,
                                      seed=5)
    stopped = window_hitting_probability(A2, None, 0.1, 0.2, 1.0, R=0.6, n_samples=1500,
                                         seed=5)
    assert stopped.hits <= free.hits


def test_bridge_correction_adds_probability():
    grid = window_hitting_probability(A2, None, 0.05, 0.5, 0.6, n_samples=2000, seed=6)
    est, se = bridge_corrected_hitting(A2, None, 0.05, 0.5, 0.6, n_samples=2000, seed=6)
    assert est >= grid.p_hat and se > 0
    with pytest.raises(ValueError):
        bridge_corrected_hitting(type_a(3, 0.2), None, 0.05, 0.5, 0.6, n_samples=10)


def test_window_hitting_matches_pde_oracle():
    est = [bridge_corrected_hitting(A2, None, 0.05, 0.5, 0.5 + w, n_samples=20_000, seed=7)
           for w in PDE_WIDTHS]
    for (p, se), ref in zip(est, PDE_HITTING):
        assert abs(p - ref) < 4 * se
    slope = np.polyfit(np.log(PDE_WIDTHS), np.log([p for p, _ in est]), 1)[0]
    assert slope == pytest.approx(PDE_SLOPE, abs=0.05)


@pytest.mark.xfail(strict=True, reason="exact slope is 0.489: the baseline probability at "
                   "t1 flattens the curve; see the decisions ledger")
def test_window_hitting_one_sided_slope_example():
    # the one-sided claim slope >= k + 1/2 - 0.2 = 0.5, checked on the exact values
    slope = np.polyfit(np.log(PDE_WIDTHS), np.log(PDE_HITTING), 1)[0]
    assert slope >= 0.5


def test_occupation_bounds():
    rec = occupation_time(A2, None, 100.0, T=0.7, n_samples=200, seed=8)
    assert rec.mean_occupation == pytest.approx(0.7, abs=1e-12)
    res = occupation_sweep(A2, None, RS, T=1.0, n_samples=1000, seed=8)
    occ = [r.mean_occupation for r in res]
    assert occ == sorted(occ)
    assert all(0 <= v <= 1.0 for v in occ)
    assert all(isinstance(r, OccupationRecord) and r.stderr >= 0 for r in res)


def test_joint_reduces_to_single_time():
    joint = joint_edge_probability(A2, None, 0.1, 0.5, 0.5, n_samples=1000, seed=9)
    single = edge_probability(A2, None, 0.1, t=0.5, n_samples=1000, seed=9)
    assert joint.hits == single.hits


def test_joint_below_marginals():
    joint, m1, m2 = joint_edge_sweep(A2, None, RS, 0.5, 1.0, n_samples=2000, seed=10,
                                     return_marginals=True)
    for j, a, b in zip(joint, m1, m2):
        assert j.hits <= min(a.hits, b.hits)
    assert [p.hits for p in joint] == sorted(p.hits for p in joint)


def test_fit_exponent_synthetic():
    rng = np.random.default_rng(0)
    n = 100_000
    res = [make_result(r, rng.binomial(n, min(1.0, 2 * r ** 1.4)), n) for r in RS]
    fit = fit_exponent(res)
    assert fit.exponent == pytest.approx(1.4, abs=0.05)
    recs = [OccupationRecord(r, 1.0, 0.5 * r ** 1.3, 1e-3 * r ** 1.3, 100) for r in RS]
    assert fit_exponent(recs).exponent == pytest.approx(1.3, abs=1e-12)
    wins = [ProbeResult(0.05, 1000, 1, 1e-3 * w ** 0.7, 0, 1, 0.5, 0.5 + w)
            for w in (0.05, 0.1, 0.2)]
    assert fit_exponent(wins, x="window").exponent == pytest.approx(0.7, abs=1e-9)
    with pytest.raises(ValueError):
        fit_exponent(res, x="time")


def test_type_b_start_on_wall():
    p = type_b(2, 0.3, 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = edge_probability_sweep(p, (0.0, 0.5), [0.05, 0.2], n_samples=500, seed=11)
    assert res[0].hits <= res[1].hits


def test_invalid_arguments():
    with pytest.raises(ValueError):
        edge_probability(A2, None, 0.0, n_samples=10)
    with pytest.raises(ValueError):
        window_hitting_probability(A2, None, 0.1, 0.6, 0.5, n_samples=10)
    with pytest.raises(ValueError):
        joint_edge_probability(A2, None, 0.1, 0.8, 0.5, n_samples=10)
    with pytest.raises(ValueError):
        occupation_time(A2, None, 0.1, T=0.0, n_samples=10)
