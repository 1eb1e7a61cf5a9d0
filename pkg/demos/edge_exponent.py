"""Edge-set probabilities and their power law in r.

For type A with N = 2 the gap divided by sqrt(2) is a one-dimensional Bessel
process, so the Monte Carlo slope can be checked against the exact law.
"""

import numpy as np
from scipy import special

from besselfrac import IntegratorConfig, edge_probability_sweep, fit_exponent, type_a

k = 0.2
params = type_a(2, k)
rs = np.geomspace(0.05, 0.3, 6)
cfg = IntegratorConfig(dt_max=1e-3, gap_safety=0.1, r_floor=3e-3)
res = edge_probability_sweep(params, None, rs, t=1.0, n_samples=20_000, cfg=cfg, seed=1)

# Y^2 / t ~ chi^2 with 2k + 1 degrees of freedom, and E^r means Y <= r / sqrt(2)
exact = special.gammainc(k + 0.5, rs**2 / 4)
print(f"{'r':>8} {'p_hat':>10} {'95% CI':>22} {'exact':>10}")
for p, e in zip(res, exact):
    print(f"{p.r:8.4f} {p.p_hat:10.5f}   [{p.ci_low:.5f}, {p.ci_high:.5f}] {e:10.5f}")
fit = fit_exponent(res)
print(f"fitted slope {fit.exponent:.3f}, small-r limit 2k+1 = {2 * k + 1:.2f}")
