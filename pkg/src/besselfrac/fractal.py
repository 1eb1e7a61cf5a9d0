"""Box-counting dimension of near-collision time sets.

The collision time set ``{t : X_t on the boundary}`` is approximated by the
sojourn set ``{t : edge_distance(X_t) <= r}`` with the diffusive coupling
``r = c * sqrt(delta)`` between the spatial threshold and the box size.
Counts are averaged over paths before taking logs: many paths have no
visit at all inside the window, so the mean of log-counts is undefined,
while the mean count scales like ``delta**(-d)``.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .model import origin
from .sde import IntegratorConfig, default_threads, simulate_path
from .stats import bootstrap_ci, fit_power_law

DEFAULT_SCALES = np.geomspace(1e-2, 1e-5, 10)


@dataclass(frozen=True, eq=False)
class DimensionEstimate:
    """Box-counting fit over a set of paths.

    ``counts`` holds the mean box count per scale and ``path_counts`` the
    per-path counts (rows are paths).  ``d_raw`` is the unclipped fitted
    slope; ``d_hat`` is clipped to ``[0, 1]``.
    """

    scales: np.ndarray
    counts: np.ndarray
    coupling_c: float
    d_hat: float
    stderr: float
    ci_low: float
    ci_high: float
    d_raw: float = math.nan
    intercept: float = math.nan
    window: tuple = (0.0, 1.0)
    path_counts: np.ndarray = field(default=None, repr=False)
    visiting_fraction: float = 0.0
    insufficient_visits: bool = False

    @property
    def thresholds(self):
        return self.coupling_c * np.sqrt(self.scales)

    def to_dict(self, per_path=False):
        d = asdict(self)
        d["scales"] = self.scales.tolist()
        d["counts"] = self.counts.tolist()
        d["thresholds"] = self.thresholds.tolist()
        d["window"] = list(self.window)
        if per_path and self.path_counts is not None:
            d["path_counts"] = self.path_counts.tolist()
        else:
            d.pop("path_counts")
        return d


def sojourn_intervals(times, distances, r, window=None):
    """Maximal intervals where the piecewise-linear ``distances <= r``.

    Crossing times between grid points are located by linear
    interpolation; the result is clipped to ``window``.

    Returns
    -------
    ndarray of shape (m, 2)
        Disjoint, sorted intervals ``[a, b]``.
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(distances, dtype=float)
    if t.ndim != 1 or t.shape != d.shape or t.size == 0:
        raise ValueError("times and distances must be 1-d arrays of equal length")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if not r > 0:
        raise ValueError("r must be positive")
    t1, t2 = (t[0], t[-1]) if window is None else map(float, window)
    if t1 > t2 or t1 < t[0] - 1e-12 or t2 > t[-1] + 1e-12:
        raise ValueError("window must lie inside the time range of the path")
    t1, t2 = max(t1, t[0]), min(t2, t[-1])
    # restrict to the window, adding interpolated end points
    lo = np.searchsorted(t, t1, side="right")
    hi = np.searchsorted(t, t2, side="left")
    d1 = np.interp(t1, t, d)
    d2 = np.interp(t2, t, d)
    tw = np.concatenate(([t1], t[lo:hi], [t2]))
    dw = np.concatenate(([d1], d[lo:hi], [d2]))
    if t1 == t2:
        return np.array([[t1, t2]]) if d1 <= r else np.empty((0, 2))
    inside = dw <= r
    if not inside.any():
        return np.empty((0, 2))
    change = np.flatnonzero(inside[1:] != inside[:-1])
    # crossing time in each segment where the indicator switches
    ta, tb = tw[change], tw[change + 1]
    da, db = dw[change], dw[change + 1]
    tc = ta + (r - da) / (db - da) * (tb - ta)
    entering = ~inside[change]
    starts = tc[entering]
    ends = tc[~entering]
    if inside[0]:
        starts = np.concatenate(([t1], starts))
    if inside[-1]:
        ends = np.concatenate((ends, [t2]))
    return np.column_stack([starts, ends])


def collision_time_set(path, r, window=None):
    """Sojourn intervals of ``path`` in the edge set of thickness ``r``."""
    return sojourn_intervals(path.times, path.edge_distances, r, window)


def box_count(intervals, delta, window):
    """Number of cells ``[t1 + m delta, t1 + (m+1) delta)`` meeting an interval.

    Cells are indexed ``m = 0 .. ceil((t2 - t1) / delta) - 1``.  Intervals
    are closed; a degenerate interval counts as a point.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    t1, t2 = map(float, window)
    if t2 < t1:
        raise ValueError("window must satisfy t1 <= t2")
    iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
    if iv.shape[0] == 0:
        return 0
    n_cells = max(1, math.ceil((t2 - t1) / delta - 1e-9))
    first = np.floor((iv[:, 0] - t1) / delta).astype(np.int64)
    last = np.floor((iv[:, 1] - t1) / delta).astype(np.int64)
    first = np.clip(first, 0, n_cells - 1)
    last = np.clip(last, 0, n_cells - 1)
    order = np.argsort(first, kind="stable")
    first, last = first[order], last[order]
    # union of integer ranges [first, last]
    reach = np.maximum.accumulate(last)
    prev_reach = np.concatenate(([-1], reach[:-1]))
    new_lo = np.maximum(first, prev_reach + 1)
    return int(np.sum(np.maximum(0, last - new_lo + 1)))


def path_box_counts(path, scales, coupling_c=1.0, window=None):
    """Box counts of one path at each scale with ``r = coupling_c * sqrt(delta)``."""
    window = _window(path.times[-1], window)
    scales = np.asarray(scales, dtype=float)
    dist = path.edge_distances
    out = np.empty(scales.size, dtype=np.int64)
    for j, delta in enumerate(scales):
        iv = sojourn_intervals(path.times, dist, coupling_c * math.sqrt(delta), window)
        out[j] = box_count(iv, delta, window)
    return out


def _window(horizon, window):
    if window is None:
        return (min(0.1, horizon), horizon)
    t1, t2 = window
    return (float(t1), float(horizon if t2 is None else t2))


def _fit(scales, mean_counts):
    fit = fit_power_law(scales, mean_counts)
    return -fit.exponent, fit.intercept


def _slope(scales):
    def statistic(rows):
        m = rows.mean(axis=0)
        if np.count_nonzero(m > 0) < 2:
            return 0.0
        return _fit(scales, m)[0]
    return statistic


def estimate_from_counts(path_counts, scales, coupling_c=1.0, window=(0.1, 1.0), *,
                         n_resamples=1000, confidence=0.95, seed=0,
                         min_visiting_fraction=0.05):
    """Fit the box-counting dimension from a ``(paths, scales)`` count matrix.

    ``d_hat = -slope`` of ``log(mean count)`` against ``log(delta)``, clipped
    to ``[0, 1]``, with a percentile bootstrap over paths.  The estimate is
    flagged ``insufficient_visits`` (and ``d_hat`` set to 0) when fewer than
    ``min_visiting_fraction`` of the paths visit the edge set at the finest
    scale or when the counts do not grow significantly under refinement
    (the lower bootstrap bound of the raw slope is not positive).
    """
    counts = np.asarray(path_counts, dtype=float)
    scales = np.asarray(scales, dtype=float)
    if counts.ndim != 2 or counts.shape[1] != scales.size or counts.shape[0] < 1:
        raise ValueError("path_counts must have shape (n_paths, n_scales)")
    if scales.size < 2 or np.any(scales <= 0):
        raise ValueError("need at least two positive scales")
    order = np.argsort(scales)[::-1]
    scales, counts = scales[order], counts[:, order]
    mean = counts.mean(axis=0)
    visiting = float(np.mean(counts[:, -1] > 0))
    if np.count_nonzero(mean > 0) < 2:
        return DimensionEstimate(scales, mean, float(coupling_c), 0.0, 0.0, 0.0, 0.0,
                                 math.nan, math.nan, tuple(window), counts.astype(np.int64),
                                 visiting, True)
    d_raw, intercept = _fit(scales, mean)
    if counts.shape[0] > 1:
        lo, hi, dist = bootstrap_ci(counts, _slope(scales), n_resamples, confidence, seed,
                                    return_distribution=True)
        stderr = float(np.std(dist, ddof=1))
    else:
        lo = hi = d_raw
        stderr = 0.0
    flag = visiting < min_visiting_fraction or d_raw <= 0 or lo <= 0
    d_hat = 0.0 if flag else float(np.clip(d_raw, 0.0, 1.0))
    return DimensionEstimate(
        scales=scales,
        counts=mean,
        coupling_c=float(coupling_c),
        d_hat=d_hat,
        stderr=stderr,
        ci_low=float(np.clip(lo, 0.0, 1.0)),
        ci_high=float(np.clip(hi, 0.0, 1.0)),
        d_raw=float(d_raw),
        intercept=float(intercept),
        window=tuple(window),
        path_counts=counts.astype(np.int64),
        visiting_fraction=visiting,
        insufficient_visits=bool(flag),
    )


def estimate_dimension(paths, coupling_c=1.0, scales=None, window=(0.1, None), **kwargs):
    """Box-counting dimension of the near-collision time set.

    Parameters
    ----------
    paths : iterable of PathSample
        Consumed lazily, one path at a time.
    coupling_c : float
        Threshold coupling ``r_j = coupling_c * sqrt(delta_j)``.
    scales : sequence of float, optional
        Box sizes ``delta_j`` (default ``1e-2 .. 1e-5``).
    window : (t1, t2)
        Time window; ``t2 = None`` means the end of each path.
    **kwargs
        Passed on to :func:`estimate_from_counts`.
    """
    if not coupling_c > 0:
        raise ValueError("coupling_c must be positive")
    scales = DEFAULT_SCALES if scales is None else np.asarray(scales, dtype=float)
    rows = []
    win = None
    for p in paths:
        w = _window(p.times[-1], window)
        if win is None:
            win = w
        rows.append(path_box_counts(p, scales, coupling_c, w))
    if not rows:
        raise ValueError("need at least one path")
    return estimate_from_counts(np.array(rows), scales, coupling_c, win, **kwargs)


def simulate_box_counts(params, n_paths, horizon=1.0, cfg=None, seed=0, *, x0=None,
                        scales=None, coupling_c=1.0, window=(0.1, None), threads=None,
                        zero_drift=False, first_index=0):
    """Simulate ``n_paths`` full-grid paths and return their box-count matrix.

    Paths are generated and reduced one at a time (per worker), so memory
    stays bounded by a single path per thread.  Row ``i`` belongs to path
    index ``first_index + i`` regardless of the thread count.
    """
    cfg = replace(cfg or IntegratorConfig(), record_spacing=0.0)
    scales = DEFAULT_SCALES if scales is None else np.asarray(scales, dtype=float)
    x0 = origin(params) if x0 is None else x0
    win = _window(horizon, window)

    def one(i):
        p = simulate_path(params, x0, horizon, cfg, seed, path_index=first_index + i,
                          zero_drift=zero_drift)
        return path_box_counts(p, scales, coupling_c, win)

    threads = threads or default_threads()
    if threads == 1:
        rows = [one(i) for i in range(n_paths)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(n_paths)))
    return np.array(rows).reshape(n_paths, scales.size), scales, win


def dimension_experiment(params, n_paths, horizon=1.0, cfg=None, seed=0, *, x0=None,
                         scales=None, coupling_c=1.0, window=(0.1, None), threads=None,
                         zero_drift=False, **kwargs):
    """Simulate paths from ``x0`` (default: the origin) and estimate the dimension."""
    counts, scales, win = simulate_box_counts(
        params, n_paths, horizon, cfg, seed, x0=x0, scales=scales, coupling_c=coupling_c,
        window=window, threads=threads, zero_drift=zero_drift)
    return estimate_from_counts(counts, scales, coupling_c, win, **kwargs)


def paired_difference(est_a, est_b, n_resamples=1000, confidence=0.95, seed=0):
    """Bootstrap interval of ``d_raw(a) - d_raw(b)`` resampling paths jointly.

    Both estimates must come from the same path indices (common random
    numbers) so that row ``i`` of each count matrix is paired.
    """
    ca, cb = est_a.path_counts, est_b.path_counts
    if ca is None or cb is None or ca.shape[0] != cb.shape[0]:
        raise ValueError("estimates need per-path counts over the same paths")
    if not np.allclose(est_a.scales, est_b.scales):
        raise ValueError("estimates must share their scales")
    na = ca.shape[1]
    scales = est_a.scales
    slope = _slope(scales)
    both = np.concatenate([ca, cb], axis=1).astype(float)

    def stat(rows):
        return slope(rows[:, :na]) - slope(rows[:, na:])

    lo, hi = bootstrap_ci(both, stat, n_resamples, confidence, seed)
    return est_a.d_raw - est_b.d_raw, lo, hi


def cantor_intervals(level, t1=0.0, t2=1.0):
    """The ``2**level`` closed intervals of the middle-thirds Cantor construction."""
    iv = np.array([[t1, t2]])
    for _ in range(level):
        w = (iv[:, 1] - iv[:, 0]) / 3.0
        iv = np.column_stack([
            np.column_stack([iv[:, 0], iv[:, 0] + w]),
            np.column_stack([iv[:, 1] - w, iv[:, 1]]),
        ]).reshape(-1, 2)
    return iv
