"""Statistical helpers: power-law fits, two-sample KS, bootstrap, Wilson CI."""

import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of ``log y = intercept + exponent * log x``."""

    exponent: float
    intercept: float
    stderr_exponent: float
    r_squared: float
    n_points: int
    n_dropped: int = 0

    def to_dict(self):
        return asdict(self)


def fit_power_law(xs, ys, weights=None):
    """Fit ``y = exp(intercept) * x**exponent`` by weighted least squares in log-log.

    Points with ``y <= 0`` (e.g. probes with zero hits) are dropped and
    counted in ``n_dropped``.  ``stderr_exponent`` is infinite with only two
    usable points.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be 1-d arrays of equal length")
    if np.any(xs <= 0):
        raise ValueError("xs must be strictly positive")
    w = np.ones_like(xs) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != xs.shape or np.any(w < 0):
        raise ValueError("weights must be nonnegative and match xs")
    keep = (ys > 0) & np.isfinite(ys) & (w > 0)
    n_dropped = int(xs.size - keep.sum())
    if keep.sum() < 2:
        raise ValueError("need at least two points with positive y")
    lx, ly, w = np.log(xs[keep]), np.log(ys[keep]), w[keep]
    if np.ptp(lx) == 0:
        raise ValueError("xs must not all be equal")
    w = w / w.sum()
    mx, my = np.dot(w, lx), np.dot(w, ly)
    sxx = np.dot(w, (lx - mx) ** 2)
    sxy = np.dot(w, (lx - mx) * (ly - my))
    slope = sxy / sxx
    intercept = my - slope * mx
    resid = ly - intercept - slope * lx
    ss_res = np.dot(w, resid**2)
    ss_tot = np.dot(w, (ly - my) ** 2)
    n = lx.size
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, my * my) else max(0.0, 1.0 - ss_res / ss_tot)
    if n >= 3:
        # weights normalized to sum 1; effective residual variance per unit weight
        stderr = math.sqrt(ss_res / (n - 2) / sxx)
    else:
        stderr = math.inf
    return ScalingFit(float(slope), float(intercept), float(stderr), float(r2), int(n), n_dropped)


def kolmogorov_sf(x):
    """Survival function of the Kolmogorov distribution, ``P(K > x)``."""
    if x <= 0:
        return 1.0
    if x < 1.0:
        # theta-function form converges fast for small x
        y = math.pi**2 / (8.0 * x * x)
        s = sum(math.exp(-(2 * j - 1) ** 2 * y) for j in range(1, 20))
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / x * s))
    s = 0.0
    for j in range(1, 101):
        term = (-1) ** (j - 1) * math.exp(-2.0 * j * j * x * x)
        s += term
        if abs(term) < 1e-17:
            break
    return min(1.0, max(0.0, 2.0 * s))


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / n
    fb = np.searchsorted(b, grid, side="right") / m
    d = float(np.max(np.abs(fa - fb)))
    en = math.sqrt(n * m / (n + m))
    return d, kolmogorov_sf(en * d)


def bootstrap_ci(values, statistic, n_resamples=1000, confidence=0.95, seed=0,
                 return_distribution=False):
    """Percentile bootstrap interval of ``statistic`` over rows of ``values``.

    ``values`` may be 1-d or have extra trailing axes (rows are resampled
    together).  Deterministic for a fixed ``seed``.
    """
    values = np.asarray(values)
    if values.shape[0] == 0:
        raise ValueError("values must be nonempty")
    if n_resamples < 100:
        raise ValueError("n_resamples must be at least 100")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    n = values.shape[0]
    idx = rng.integers(0, n, size=(n_resamples, n))
    dist = np.array([statistic(values[i]) for i in idx], dtype=float)
    tail = (1.0 - confidence) / 2.0
    low, high = np.quantile(dist, [tail, 1.0 - tail])
    if return_distribution:
        return float(low), float(high), dist
    return float(low), float(high)


def wilson_interval(hits, n, confidence=0.95):
    """Wilson score interval for a binomial proportion."""
    from scipy.stats import norm

    if n <= 0:
        raise ValueError("n must be positive")
    if not 0 <= hits <= n:
        raise ValueError("hits must lie in [0, n]")
    z = norm.ppf(0.5 + confidence / 2.0)
    p = hits / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    low = 0.0 if hits == 0 else max(0.0, centre - half)
    high = 1.0 if hits == n else min(1.0, centre + half)
    return min(low, p), max(high, p)
