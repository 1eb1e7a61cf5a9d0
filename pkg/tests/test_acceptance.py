"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a one-line verdict that is printed in the pytest terminal
summary (and to stdout when run with ``-s``).  Run on its own with

    pytest tests/test_acceptance.py -v

Integrator settings are pinned per criterion.  Exponent fits use
``gap_safety = 0.1, r_floor = 3e-3``, whose bias on the fitted r-range is
well inside the tolerance when checked against the exact N = 2 law (see
``tests/oracles/exact_slopes.py``).  The occupation fit over the small radii
``0.01 .. 0.1`` uses the finer ``gap_safety = 0.02``.
"""

import math

import numpy as np
import pytest
from scipy import stats

from besselfrac import (IntegratorConfig, edge_distance, edge_probability_sweep,
                        exact_bessel_transition, fit_exponent, joint_edge_sweep, k_prime,
                        kappa, ks_two_sample, occupation_sweep, scaled_pair,
                        simulate_ensemble, type_a, type_b, weight, weight_scaling_exponent)
from besselfrac.fractal import (DEFAULT_SCALES, box_count, cantor_intervals,
                                estimate_from_counts, paired_difference, simulate_box_counts)
from besselfrac.model import drift

from conftest import ACCEPTANCE

FIT_CFG = IntegratorConfig(dt_max=1e-3, gap_safety=0.1, r_floor=3e-3)
RS = np.geomspace(0.05, 0.3, 6)
N_FIT = 200_000


def record(number, passed, text):
    ACCEPTANCE[number] = (bool(passed), text)
    print(f"[{'PASS' if passed else 'FAIL'}] {number}. {text}", flush=True)
    assert passed, text


def fitted_slope(params, seed):
    res = edge_probability_sweep(params, None, RS, t=1.0, n_samples=N_FIT, cfg=FIT_CFG,
                                 seed=seed)
    return fit_exponent(res)


def test_criterion_1_edge_exponent_type_a():
    parts, ok = [], True
    for seed, (n, k) in enumerate([(2, 0.1), (2, 0.25), (3, 0.2)], start=1):
        fit = fitted_slope(type_a(n, k), seed)
        target = 2 * k + 1
        ok &= abs(fit.exponent - target) <= 0.2
        parts.append(f"A(N={n},k={k}) {fit.exponent:.3f} vs {target:.2f}")
    record(1, ok, "edge-probability exponent, type A (+-0.2): " + "; ".join(parts))


def test_criterion_2_edge_exponent_type_b():
    parts, ok = [], True
    for seed, (k, alpha) in enumerate([(0.3, 0.5), (0.2, 2.0)], start=11):
        params = type_b(2, k, alpha)
        fit = fitted_slope(params, seed)
        target = 2 * k_prime(params) + 1
        ok &= abs(fit.exponent - target) <= 0.2
        parts.append(f"B(k={k},alpha={alpha}) {fit.exponent:.3f} vs {target:.2f}")
    record(2, ok, "edge-probability exponent, type B (+-0.2): " + "; ".join(parts))


def test_criterion_3_oracle_equivalence():
    parts, ok = [], True
    n = 100_000
    for seed, k in enumerate([0.1, 0.3, 0.45, 0.7], start=21):
        params = type_a(2, k)
        ens = simulate_ensemble(params, (0, 0), [1.0], n, IntegratorConfig(dt_max=1e-3),
                                seed=seed)
        gap = edge_distance(params, ens.states[:, 0]) / math.sqrt(2.0)
        exact = exact_bessel_transition(0.0, 1.0, k, seed=seed, size=n)
        d, _ = ks_two_sample(gap, exact)
        ok &= d < 0.02
        parts.append(f"k={k} D={d:.4f}")
    record(3, ok, "gap law vs exact Bessel sampler, KS < 0.02 at 1e5: " + "; ".join(parts))


def test_criterion_4_semi_stability():
    parts, ok = [], True
    cases = [(type_a(3, 0.2), 4.0, 0.25), (type_b(2, 0.3, 1.0), 2.0, 0.5)]
    for seed, (params, c, t) in enumerate(cases, start=31):
        a, b = scaled_pair(params, t, c, 10_000, IntegratorConfig(), seed=seed)
        d, p = ks_two_sample(a, b)
        ok &= p > 0.01
        name = f"{params.root_system.value}(N={params.n_particles},k={params.k})"
        parts.append(f"{name} c={c:g} D={d:.4f} p={p:.3f}")
    record(4, ok, "1/2-self-similarity, KS p > 0.01 at 1e4: " + "; ".join(parts))


DIM_CFG = IntegratorConfig(dt_max=1e-3, gap_safety=0.05, r_floor=1e-4)
DIM_PATHS = 200
DIM_SEED = 7


def dimension(params, zero_drift=False):
    counts, scales, win = simulate_box_counts(params, DIM_PATHS, 1.0, DIM_CFG, DIM_SEED,
                                              scales=DEFAULT_SCALES, coupling_c=1.0,
                                              window=(0.1, 1.0), zero_drift=zero_drift)
    return estimate_from_counts(counts, scales, 1.0, win)


def test_criterion_5_dimension():
    brownian = dimension(type_b(1, 0.3, 1.0), zero_drift=True)
    ok_bm = abs(brownian.d_hat - 0.5) <= 0.1
    sweep = {k: dimension(type_a(2, k)) for k in (0.05, 0.2, 0.35, 0.45)}
    ok_k = abs(sweep[0.05].d_hat - 0.45) <= 0.15
    # consecutive paired differences (same path indices) must exclude zero
    diffs, ok_mono = [], True
    ks = sorted(sweep)
    for lo_k, hi_k in zip(ks, ks[1:]):
        diff, lo, hi = paired_difference(sweep[lo_k], sweep[hi_k])
        ok_mono &= lo > 0 and sweep[lo_k].d_hat > sweep[hi_k].d_hat
        diffs.append(f"{lo_k}-{hi_k}: {diff:.3f} [{lo:.3f},{hi:.3f}]")
    empty = dimension(type_a(2, 0.6))
    ok_flag = empty.insufficient_visits and empty.d_hat == 0
    values = ", ".join(f"{k}:{e.d_hat:.3f}" for k, e in sweep.items())
    record(5, ok_bm and ok_k and ok_mono and ok_flag,
           f"dimension: Brownian {brownian.d_hat:.3f} (0.5+-0.1); k=0.05 "
           f"{sweep[0.05].d_hat:.3f} (0.45+-0.15); sweep {values}; paired {'; '.join(diffs)}; "
           f"k=0.6 flag={empty.insufficient_visits} d_hat={empty.d_hat:g}")


def test_criterion_6_joint_exponent():
    res = joint_edge_sweep(type_a(2, 0.2), None, RS, 0.5, 1.0, n_samples=N_FIT, cfg=FIT_CFG,
                           seed=41)
    fit = fit_exponent(res)
    record(6, abs(fit.exponent - 2.8) <= 0.3,
           f"two-time joint exponent (s1=0.5, s2=1): {fit.exponent:.3f} vs 2.80 (+-0.3)")


def test_criterion_7_occupation_exponent():
    rs = np.geomspace(0.01, 0.1, 6)
    res = occupation_sweep(type_a(2, 0.2), None, rs, T=1.0, n_samples=20_000,
                           cfg=IntegratorConfig(dt_max=1e-3, gap_safety=0.02, r_floor=1e-3),
                           seed=51)
    fit = fit_exponent(res)
    record(7, abs(fit.exponent - 1.4) <= 0.2,
           f"occupation-time exponent (T=1, r in [0.01, 0.1]): {fit.exponent:.3f} vs 1.40 "
           f"(+-0.2)")


def test_criterion_8_exact_unit_layer():
    checks = []
    a3, b2 = type_a(3, 0.5), type_b(2, 0.5, 1.0)
    checks.append(k_prime(type_b(2, 0.4, 0.5)) == pytest.approx(0.2, abs=1e-12))
    checks.append(kappa(a3) == pytest.approx(1.5, abs=1e-12))
    checks.append(kappa(b2) == pytest.approx(2.0, abs=1e-12))
    checks.append(weight(a3, (0, 1, 3)) == pytest.approx(6.0, abs=1e-12))
    checks.append(weight(type_b(2, 0.5, 2.0), (1, 2)) == pytest.approx(12.0, abs=1e-12))
    checks.append(weight_scaling_exponent(a3) == 3 and weight_scaling_exponent(b2) == 4)
    checks.append(edge_distance(a3, (0, 0.2, 1)) == pytest.approx(0.2, abs=1e-12))
    checks.append(edge_distance(type_b(3, 0.5, 1.0), (0.05, 1, 2)) == pytest.approx(0.05,
                                                                                     abs=1e-12))
    checks.append(np.allclose(drift(type_a(2, 0.3), (0, 1)), (-0.3, 0.3), rtol=0, atol=1e-12))
    checks.append(np.allclose(drift(b2, (1, 2)), (1 / 6, 11 / 12), rtol=0, atol=1e-12))
    ok_closed = all(checks)

    iv = cantor_intervals(12)
    scales = np.geomspace(1e-1, 1e-5, 13)
    counts = np.array([[box_count(iv, d, (0, 1)) for d in scales]])
    cantor = estimate_from_counts(counts, scales, window=(0, 1)).d_raw
    ok_cantor = abs(cantor - math.log(2) / math.log(3)) <= 0.02

    params = type_a(3, 0.2)
    runs = [simulate_ensemble(params, (0, 0, 0), [0.5, 1.0], 600, seed=61, threads=t,
                              windows=[(0.2, 0.8)], occ_thresholds=[0.05])
            for t in (1, 4, 8)]
    ok_threads = all(np.array_equal(runs[0].states, r.states)
                     and np.array_equal(runs[0].window_min, r.window_min)
                     and np.array_equal(runs[0].occupation, r.occupation) for r in runs[1:])
    boxes = [simulate_box_counts(params, 8, 0.5, DIM_CFG, 62, threads=t)[0] for t in (1, 4)]
    ok_threads &= np.array_equal(boxes[0], boxes[1])
    record(8, ok_closed and ok_cantor and ok_threads,
           f"unit layer: {sum(checks)}/{len(checks)} closed forms to 1e-12; Cantor "
           f"{cantor:.4f} vs {math.log(2) / math.log(3):.4f} (+-0.02); thread counts 1/4/8 "
           f"bit-identical={ok_threads}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
