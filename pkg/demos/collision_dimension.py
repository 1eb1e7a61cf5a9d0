"""Box-counting dimension of the near-collision times of two particles.

The dimension falls from 1/2 (Brownian zeros) toward 0 as k grows and the
process stops visiting the collision wall.
"""

from besselfrac import IntegratorConfig, type_a, type_b
from besselfrac.fractal import DEFAULT_SCALES, estimate_from_counts, simulate_box_counts

cfg = IntegratorConfig(dt_max=1e-3, gap_safety=0.05, r_floor=1e-4)


def run(params, zero_drift=False, n_paths=100):
    counts, scales, win = simulate_box_counts(params, n_paths, 1.0, cfg, 7,
                                              scales=DEFAULT_SCALES, coupling_c=1.0,
                                              window=(0.1, 1.0), zero_drift=zero_drift)
    return estimate_from_counts(counts, scales, 1.0, win)


bm = run(type_b(1, 0.3, 1.0), zero_drift=True)
print(f"reflected Brownian motion: d_hat {bm.d_hat:.3f} [{bm.ci_low:.3f}, {bm.ci_high:.3f}]")
for k in (0.05, 0.2, 0.35, 0.6):
    est = run(type_a(2, k))
    flag = " (insufficient visits)" if est.insufficient_visits else ""
    print(f"k = {k:4.2f}: d_hat {est.d_hat:.3f}, reference {max(0.0, 0.5 - k):.2f}{flag}")
