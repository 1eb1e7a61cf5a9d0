"""Monte Carlo estimators of edge-set probabilities.

All sweeps over ``r`` (and over time windows) are computed from a single
ensemble, so the estimates share common random numbers: because the edge
sets are nested, the hit counts are exactly monotone in ``r``.
"""

import math
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np

from .model import edge_distance, origin
from .sde import IntegratorConfig, _x0_array, simulate_ensemble
from .stats import fit_power_law, wilson_interval


class StartWarning(UserWarning):
    """The starting point is outside the region a bound is stated for."""


@dataclass(frozen=True)
class ProbeResult:
    """Binomial estimate of an edge-set probability with a Wilson 95% interval.

    ``t1``/``t2`` record the time (or window, or the pair of times) probed.
    """

    r: float
    n_samples: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    t1: float | None = None
    t2: float | None = None

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class OccupationRecord:
    """Mean time spent in the edge set of thickness ``r`` up to ``horizon``."""

    r: float
    horizon: float
    mean_occupation: float
    stderr: float
    n_samples: int = 0

    def to_dict(self):
        return asdict(self)


PROBE_FIELDS = tuple(ProbeResult.__dataclass_fields__)
OCCUPATION_FIELDS = tuple(OccupationRecord.__dataclass_fields__)


def make_result(r, hits, n, t1=None, t2=None):
    hits = int(hits)
    lo, hi = wilson_interval(hits, n)
    return ProbeResult(float(r), int(n), hits, hits / n, float(lo), float(hi), t1, t2)


def _radii(rs):
    rs = np.atleast_1d(np.asarray(rs, dtype=float))
    if rs.ndim != 1 or rs.size == 0:
        raise ValueError("need at least one r")
    if np.any(~(rs > 0)):
        raise ValueError("r must be positive")
    return rs


def _check_start(params, x0, rs, R=math.inf):
    x = _x0_array(params, x0)
    ed = float(edge_distance(params, x))
    if ed > np.min(rs):
        warnings.warn(f"x0 has edge distance {ed:g}, outside E^r for r = {np.min(rs):g}",
                      StartWarning, stacklevel=3)
    if np.linalg.norm(x) >= R:
        warnings.warn("x0 lies outside the open ball of radius R", StartWarning, stacklevel=3)
    return x


def _start(params, x0):
    return origin(params) if x0 is None else x0


def edge_probability_sweep(params, x0, rs, t=1.0, n_samples=10_000, cfg=None, seed=0,
                           *, threads=None):
    """``P(X_t in E^r | X_0 = x0)`` for every ``r`` in ``rs`` from one ensemble.

    The stopping radius of ``cfg`` is ignored here (it is used only to check
    the starting point).
    """
    rs = _radii(rs)
    cfg = cfg or IntegratorConfig()
    x0 = _check_start(params, _start(params, x0), rs, cfg.ball_radius)
    if not t > 0:
        raise ValueError("t must be positive")
    ens = simulate_ensemble(params, x0, [t], n_samples, replace(cfg, ball_radius=math.inf),
                            seed, threads=threads)
    ed = edge_distance(params, ens.states[:, 0, :])
    return [make_result(r, np.count_nonzero(ed <= r), n_samples, t, t) for r in rs]


def edge_probability(params, x0, r, t=1.0, n_samples=10_000, cfg=None, seed=0, *,
                     threads=None):
    """Estimate ``P(X_t in E^r | X_0 = x0)`` from ``n_samples`` paths."""
    return edge_probability_sweep(params, x0, [r], t, n_samples, cfg, seed,
                                  threads=threads)[0]


def window_hitting_sweep(params, x0, rs, windows, R=math.inf, n_samples=10_000, cfg=None,
                         seed=0, *, threads=None):
    """Hitting probabilities of ``E^r`` during each window, stopped at ``T_R``.

    A path hits if its edge distance is ``<= r`` at some grid time in
    ``[t1, min(t2, T_R))``.  All ``(window, r)`` pairs come from one ensemble.

    Returns
    -------
    list of list of ProbeResult
        ``out[i][j]`` is window ``i`` and radius ``rs[j]``.
    """
    rs = _radii(rs)
    win = np.asarray(windows, dtype=float).reshape(-1, 2)
    if np.any(win[:, 0] <= 0) or np.any(win[:, 1] < win[:, 0]):
        raise ValueError("windows must satisfy 0 < t1 <= t2")
    if not R > 0:
        raise ValueError("R must be positive")
    cfg = replace(cfg or IntegratorConfig(), ball_radius=float(R))
    x0 = _check_start(params, _start(params, x0), rs, R)
    ens = simulate_ensemble(params, x0, [win[:, 1].max()], n_samples, cfg, seed,
                            windows=win, threads=threads)
    out = []
    for j, (a, b) in enumerate(win):
        m = ens.window_min[:, j]
        out.append([make_result(r, np.count_nonzero(m <= r), n_samples, float(a), float(b))
                    for r in rs])
    return out


def window_hitting_probability(params, x0, r, t1, t2, R=math.inf, n_samples=10_000,
                               cfg=None, seed=0, *, threads=None):
    """Estimate ``P(X_s in E^r for some s in [t1, t2 ^ T_R])``."""
    if not 0 < t1 <= t2:
        raise ValueError("need 0 < t1 <= t2")
    return window_hitting_sweep(params, x0, [r], [(t1, t2)], R, n_samples, cfg, seed,
                                threads=threads)[0][0]


def bridge_corrected_hitting(params, x0, r, t1, t2, n_samples=10_000, cfg=None, seed=0, *,
                             threads=None):
    """Window hitting probability including crossings between grid points.

    Between consecutive grid points the edge distance is treated as a
    Brownian bridge and the probability that it dips below ``r`` is added
    analytically.  Valid only when the edge distance is a single diffusing
    coordinate: type A with N = 2, or type B with N = 1.

    Returns
    -------
    (estimate, stderr)
    """
    if not ((not params.is_type_b and params.n_particles == 2)
            or (params.is_type_b and params.n_particles == 1)):
        raise ValueError("bridge correction needs a one-dimensional edge distance")
    if not 0 < t1 <= t2:
        raise ValueError("need 0 < t1 <= t2")
    cfg = cfg or IntegratorConfig()
    ens = simulate_ensemble(params, _start(params, x0), [t2], n_samples, cfg, seed,
                            windows=[(t1, t2)], bridge_r=r, threads=threads)
    hit = np.where(ens.window_min[:, 0] <= r, 1.0, -np.expm1(ens.bridge_log_nocross[:, 0]))
    return float(hit.mean()), float(hit.std(ddof=1) / math.sqrt(n_samples))


def occupation_sweep(params, x0, rs, T=1.0, n_samples=10_000, cfg=None, seed=0, *,
                     threads=None):
    """Mean of ``int_0^T 1[X_s in E^r] ds`` for every ``r`` (trapezoidal rule)."""
    rs = _radii(rs)
    if not T > 0:
        raise ValueError("T must be positive")
    cfg = replace(cfg or IntegratorConfig(), ball_radius=math.inf)
    ens = simulate_ensemble(params, _start(params, x0), [T], n_samples, cfg, seed,
                            occ_thresholds=rs, occ_horizon=T, threads=threads)
    occ = np.clip(ens.occupation, 0.0, T)
    sd = occ.std(axis=0, ddof=1) if n_samples > 1 else np.zeros(rs.size)
    return [OccupationRecord(float(r), float(T), float(occ[:, j].mean()),
                             float(sd[j] / math.sqrt(n_samples)), n_samples)
            for j, r in enumerate(rs)]


def occupation_time(params, x0, r, T=1.0, n_samples=10_000, cfg=None, seed=0, *,
                    threads=None):
    """Estimate the expected time spent in ``E^r`` during ``[0, T]``."""
    return occupation_sweep(params, x0, [r], T, n_samples, cfg, seed, threads=threads)[0]


def joint_edge_sweep(params, x0, rs, s1, s2, n_samples=10_000, cfg=None, seed=0, *,
                     threads=None, return_marginals=False):
    """``P(X_{s1} in E^r, X_{s2} in E^r)`` for every ``r`` from one ensemble.

    With ``return_marginals`` the single-time estimates at ``s1`` and ``s2``
    from the same paths are returned as well.
    """
    rs = _radii(rs)
    if not 0 < s1 <= s2:
        raise ValueError("need 0 < s1 <= s2")
    cfg = replace(cfg or IntegratorConfig(), ball_radius=math.inf)
    ens = simulate_ensemble(params, _start(params, x0), [s1, s2], n_samples, cfg, seed,
                            threads=threads)
    e1 = edge_distance(params, ens.states[:, 0, :])
    e2 = edge_distance(params, ens.states[:, 1, :])
    joint = [make_result(r, np.count_nonzero((e1 <= r) & (e2 <= r)), n_samples, s1, s2)
             for r in rs]
    if not return_marginals:
        return joint
    m1 = [make_result(r, np.count_nonzero(e1 <= r), n_samples, s1, s1) for r in rs]
    m2 = [make_result(r, np.count_nonzero(e2 <= r), n_samples, s2, s2) for r in rs]
    return joint, m1, m2


def joint_edge_probability(params, x0, r, s1, s2, n_samples=10_000, cfg=None, seed=0, *,
                           threads=None):
    """Estimate ``P(X_{s1} in E^r, X_{s2} in E^r)`` from single paths."""
    return joint_edge_sweep(params, x0, [r], s1, s2, n_samples, cfg, seed,
                            threads=threads)[0]


def fit_exponent(results, x="r"):
    """Log-log fit of ``p_hat`` (or mean occupation) against ``r``.

    Points are weighted by their inverse relative variance; zero estimates
    are dropped by the fit.  ``x`` selects the abscissa: ``"r"`` or
    ``"window"`` (``t2 - t1``).
    """
    results = list(results)
    if x == "r":
        xs = [p.r for p in results]
    elif x == "window":
        xs = [p.t2 - p.t1 for p in results]
    else:
        raise ValueError("x must be 'r' or 'window'")
    if all(isinstance(p, OccupationRecord) for p in results):
        ys = np.array([p.mean_occupation for p in results])
        se = np.array([p.stderr for p in results])
        w = np.where((ys > 0) & (se > 0), (ys / np.where(se > 0, se, 1.0)) ** 2, 0.0)
        return fit_power_law(xs, ys, w)
    ys = np.array([p.p_hat for p in results])
    hits = np.array([p.hits for p in results], dtype=float)
    # var(log p_hat) ~ (1 - p) / hits
    w = hits / np.maximum(1.0 - ys, 1.0 / np.array([p.n_samples for p in results]))
    return fit_power_law(xs, ys, w)
