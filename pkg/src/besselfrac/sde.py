"""Trajectory generation for multivariate Bessel processes.

The integrator is an adaptive Euler-Maruyama scheme (explicit, tamed or
drift-implicit).  The step shrinks with the square of the distance to the
nearest collision,

    dt_eff = min(dt_max, gap_safety * max(edge_distance, r_floor)**2),

which is the diffusive scale on which the singular drift varies.  In the
explicit schemes, type B coordinates are reflected at the origin and all
coordinates are re-sorted after every step, so every state stays in the
closed chamber, and the drift is evaluated at the state pushed apart to gaps
of at least ``r_floor``; a path started on the boundary takes its first step
with ``dt = gap_safety * r_floor**2``.  The implicit scheme lands in the open
chamber by construction.

The error of the explicit scheme near the boundary is controlled mostly by
``gap_safety``: the relative excess of the time spent within distance ``r``
of a collision grows roughly like ``(r_floor / r)**(1 - 2k)`` at fixed
``gap_safety`` and shrinks proportionally to it.

Also here: the exact one-dimensional Bessel transition law (sampler and
density), used as an oracle for the N = 2 type A gap, and generators for
self-similarity checks.
"""

import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from . import _kernels
from .model import (Configuration, ModelParams, RootSystem, edge_distance,
                    is_in_closed_chamber, origin)
from .rng import derive_state
from .special import bessel_ive

DEFAULT_SHARD = 2048
THREADS_ENV = "BESSELFRAC_THREADS"


class Scheme(str, Enum):
    EULER = "euler"
    TAMED = "tamed"
    IMPLICIT = "implicit"


_SCHEME_CODE = {Scheme.EULER: _kernels.EULER, Scheme.TAMED: _kernels.TAMED,
                Scheme.IMPLICIT: _kernels.IMPLICIT}


@dataclass(frozen=True)
class IntegratorConfig:
    """Step-size control of the adaptive integrator.

    dt_max : largest step.
    gap_safety : factor ``c`` in ``dt = c * gap**2`` near the boundary.
    r_floor : gap below which the step is not refined further.
    ball_radius : stop when ``|X| >= R`` (inf disables stopping).
    scheme : plain Euler-Maruyama, the tamed variant, which caps the drift
        displacement of one step at the current gap, or the drift-implicit
        variant, which solves ``x' = x + dW + dt * drift(x')`` and needs no
        nudging at the boundary (about three times the cost per step).
    record_spacing : minimal time between recorded grid points of a single
        path (0 keeps the full adaptive grid).
    """

    dt_max: float = 1e-3
    gap_safety: float = 0.05
    r_floor: float = 1e-3
    ball_radius: float = math.inf
    scheme: Scheme = Scheme.EULER
    record_spacing: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        for name in ("dt_max", "gap_safety", "ball_radius"):
            v = float(getattr(self, name))
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")
            object.__setattr__(self, name, v)
        for name in ("r_floor", "record_spacing"):
            v = float(getattr(self, name))
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
            object.__setattr__(self, name, v)
        if not math.isfinite(self.dt_max) or not math.isfinite(self.gap_safety):
            raise ValueError("dt_max and gap_safety must be finite")

    def to_dict(self):
        d = asdict(self)
        d["scheme"] = self.scheme.value
        if math.isinf(self.ball_radius):
            d["ball_radius"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**{key: (math.inf if v == "inf" else v) for key, v in d.items()})


class SimulationError(RuntimeError):
    """The integrator produced a non-finite state.

    ``last_state``, ``time`` and ``step`` describe where it happened.
    """

    def __init__(self, message, last_state=None, time=None, step=None, path_index=None):
        super().__init__(message)
        self.last_state = None if last_state is None else np.asarray(last_state).tolist()
        self.time = time
        self.step = step
        self.path_index = path_index

    def payload(self):
        return {"error": str(self), "last_state": self.last_state, "time": self.time,
                "step": self.step, "path_index": self.path_index}


@dataclass(frozen=True, eq=False)
class PathSample:
    """A recorded trajectory on its (adaptive) time grid."""

    times: np.ndarray
    states: np.ndarray
    params: ModelParams
    integrator: IntegratorConfig
    seed: int
    path_index: int = 0
    stopped_at_R: float | None = None
    n_steps: int = 0
    zero_drift: bool = False

    @property
    def edge_distances(self):
        return edge_distance(self.params, self.states)

    def __len__(self):
        return self.times.size


def _kind(params):
    return 1 if params.root_system is RootSystem.B else 0


def _x0_array(params, x0):
    if x0 is None:
        x0 = origin(params)
    if not isinstance(x0, Configuration):
        x0 = Configuration(x0)
    arr = np.array(x0.coords, dtype=float)
    if arr.size != params.n_particles:
        raise ValueError(f"x0 has {arr.size} coordinates, expected {params.n_particles}")
    if not is_in_closed_chamber(params, arr):
        raise ValueError("x0 must lie in the closed chamber")
    return arr


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return seed


def simulate_path(params, x0, horizon, cfg=None, seed=0, *, path_index=0,
                  zero_drift=False, chunk=65536):
    """Simulate one trajectory on ``[0, horizon]`` and record its grid.

    Parameters
    ----------
    params : ModelParams
    x0 : Configuration or array-like
        Starting point in the closed chamber; may lie on the boundary.
    horizon : float
    cfg : IntegratorConfig, optional
    seed, path_index : int
        Key of the random stream.  The same key reproduces the path exactly.
    zero_drift : bool
        Test hook that switches the drift off.

    Returns
    -------
    PathSample
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    cfg = cfg or IntegratorConfig()
    seed = _check_seed(seed)
    x = _x0_array(params, x0)
    kind = _kind(params)
    state = np.array(derive_state(seed, path_index), dtype=np.uint64)
    times = [np.zeros(1)]
    states = [x.copy()[None, :]]
    t = 0.0
    last_rec = 0.0
    n_steps = 0
    stopped = None
    if np.linalg.norm(x) >= cfg.ball_radius:
        stopped = 0.0
    scheme = _SCHEME_CODE[cfg.scheme]
    while stopped is None and t < horizon:
        buf_t = np.empty(chunk)
        buf_x = np.empty((chunk, params.n_particles))
        w, steps, t, last_rec, flag = _kernels.path_kernel(
            x, state, t, float(horizon), kind, params.k, params.alpha or 0.0,
            cfg.dt_max, cfg.gap_safety, cfg.r_floor, scheme, zero_drift,
            cfg.ball_radius, cfg.record_spacing, last_rec, buf_t, buf_x)
        n_steps += steps
        times.append(buf_t[:w])
        states.append(buf_x[:w])
        if flag == 3:
            prev = states[-1][-1] if w else states[-2][-1]
            raise SimulationError("non-finite state in simulate_path", last_state=prev,
                                  time=float(t), step=n_steps, path_index=path_index)
        if flag == 2:
            stopped = float(t)
        if flag == 1:
            break
    return PathSample(
        times=np.concatenate(times),
        states=np.concatenate(states, axis=0),
        params=params,
        integrator=cfg,
        seed=seed,
        path_index=path_index,
        stopped_at_R=stopped,
        n_steps=n_steps,
        zero_drift=zero_drift,
    )


@dataclass
class EnsembleResult:
    """Per-path reductions of an ensemble run (rows ordered by path index)."""

    times: np.ndarray
    states: np.ndarray
    window_min: np.ndarray
    occupation: np.ndarray
    stop_times: np.ndarray
    n_steps: np.ndarray
    bridge_log_nocross: np.ndarray
    occ_thresholds: np.ndarray = field(default_factory=lambda: np.empty(0))

    def edge_distances(self, params, time_index=-1):
        return edge_distance(params, self.states[:, time_index, :])


def simulate_ensemble(params, x0, times, n_paths, cfg=None, seed=0, *,
                      windows=(), occ_thresholds=(), occ_horizon=None,
                      bridge_r=None, threads=None, zero_drift=False,
                      first_index=0, shard_size=DEFAULT_SHARD):
    """Run ``n_paths`` independent paths and keep only reductions.

    Path ``i`` uses the stream keyed by ``(seed, first_index + i)``.  Work is
    split into shards of consecutive path indices; the shard layout does not
    depend on ``threads``, so results are bit-identical for any worker count.

    Parameters
    ----------
    times : sequence of float
        Checkpoints at which states are stored (positive).
    windows : sequence of (float, float)
        For each window track the minimum edge distance over grid times
        inside it (and before the exit time from the ball).  Window edges
        are added to the checkpoints.
    occ_thresholds : sequence of float
        Edge-set thicknesses for dwell-time accumulation.
    occ_horizon : float, optional
        Upper limit of the dwell-time integrals (defaults to the last time).
    bridge_r : float, optional
        Threshold for the Brownian-bridge crossing diagnostic.
    """
    cfg = cfg or IntegratorConfig()
    seed = _check_seed(seed)
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    x = _x0_array(params, x0)
    requested = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(requested <= 0) or not np.all(np.isfinite(requested)):
        raise ValueError("checkpoint times must be positive and finite")
    ck = set(requested.tolist())
    win = np.asarray(windows, dtype=float).reshape(-1, 2)
    if np.any(win[:, 0] < 0) or np.any(win[:, 1] < win[:, 0]):
        raise ValueError("windows must satisfy 0 <= t1 <= t2")
    ck.update(win.ravel().tolist())
    occ = np.asarray(occ_thresholds, dtype=float).reshape(-1)
    if occ.size:
        if occ_horizon is None:
            occ_horizon = max(ck)
        ck.add(float(occ_horizon))
    occ_horizon = float(occ_horizon) if occ_horizon is not None else 0.0
    ck.discard(0.0)
    if not ck:
        raise ValueError("nothing to simulate: no positive time given")
    checkpoints = np.array(sorted(ck))
    n = params.n_particles
    states = np.empty((n_paths, checkpoints.size, n))
    wmin = np.empty((n_paths, win.shape[0]))
    occ_out = np.zeros((n_paths, occ.size))
    stop = np.empty(n_paths)
    steps = np.empty(n_paths, dtype=np.int64)
    bridge = np.empty((n_paths, win.shape[0]))
    status = np.empty(n_paths, dtype=np.int64)
    kind = _kind(params)
    scheme = _SCHEME_CODE[cfg.scheme]
    br = math.inf if bridge_r is None else float(bridge_r)
    # variance rate of the gap coordinate (difference of two Brownian motions)
    bridge_rate = 2.0 if kind == 0 else 1.0
    lo = np.ascontiguousarray(win[:, 0])
    hi = np.ascontiguousarray(win[:, 1])

    def run_shard(bounds):
        a, b = bounds
        _kernels.ensemble_kernel(
            x, np.uint64(seed), first_index + a, first_index + b, kind, params.k,
            params.alpha or 0.0, cfg.dt_max, cfg.gap_safety, cfg.r_floor, scheme,
            zero_drift, cfg.ball_radius, checkpoints, lo, hi, occ, occ_horizon,
            br, bridge_rate, states[a:b], wmin[a:b], occ_out[a:b], stop[a:b],
            steps[a:b], bridge[a:b], status[a:b])

    shards = [(a, min(a + shard_size, n_paths)) for a in range(0, n_paths, shard_size)]
    threads = threads or default_threads()
    if threads == 1 or len(shards) == 1:
        for s in shards:
            run_shard(s)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_shard, shards))
    bad = np.flatnonzero(status != _kernels.OK)
    if bad.size:
        i = int(bad[0])
        raise SimulationError("non-finite state in ensemble", path_index=first_index + i,
                              step=int(steps[i]))
    index = np.searchsorted(checkpoints, requested)
    return EnsembleResult(
        times=requested,
        states=states[:, index, :],
        window_min=wmin,
        occupation=occ_out,
        stop_times=stop,
        n_steps=steps,
        bridge_log_nocross=bridge,
        occ_thresholds=occ,
    )


# -- exact one-dimensional Bessel oracle --------------------------------------

def _generator(seed):
    return np.random.Generator(np.random.Philox(key=_check_seed(seed)))


def sample_noncentral_chisquare(df, nonc, size, rng):
    """Noncentral chi-squared draws for real ``df > 0``.

    Uses ``chi2(df - 1) + (Z + sqrt(nonc))**2`` when ``df > 1`` and the
    Poisson mixture ``chi2(df + 2 * Poisson(nonc / 2))`` otherwise.
    """
    if df <= 0:
        raise ValueError("df must be positive")
    nonc = np.broadcast_to(np.asarray(nonc, dtype=float), size)
    if np.any(nonc < 0):
        raise ValueError("noncentrality must be nonnegative")
    if df > 1:
        z = rng.standard_normal(size) + np.sqrt(nonc)
        return rng.chisquare(df - 1, size) + z * z
    j = rng.poisson(nonc / 2.0, size)
    return rng.chisquare(df + 2.0 * j, size)


def exact_bessel_transition(y0, t, k, seed=0, size=None):
    """Exact draw of ``Y_t`` given ``Y_0 = y0`` for ``dY = dB + k dt / Y``.

    ``Y_t**2 / t`` is noncentral chi-squared with ``2k + 1`` degrees of
    freedom and noncentrality ``y0**2 / t``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if y0 < 0 or not k > 0:
        raise ValueError("need y0 >= 0 and k > 0")
    shape = () if size is None else size
    q = sample_noncentral_chisquare(2.0 * k + 1.0, y0 * y0 / t, shape, _generator(seed))
    out = np.sqrt(t * q)
    return float(out) if size is None else out


def exact_bessel_density(y0, t, y, k):
    """Transition density of the Bessel process at ``y`` after time ``t``.

    Index ``nu = k - 1/2``.  For ``y0 > 0``

        p = (y/t) (y/y0)**nu exp(-(y0**2 + y**2) / 2t) I_nu(y0 y / t),

    and for ``y0 = 0`` the limit ``y**2k exp(-y**2/2t) / (2**nu Gamma(k+1/2) t**(k+1/2))``.
    """
    y = np.asarray(y, dtype=float)
    if not t > 0 or y0 < 0 or not k > 0:
        raise ValueError("need t > 0, y0 >= 0 and k > 0")
    if np.any(y <= 0):
        raise ValueError("density is defined for y > 0")
    nu = k - 0.5
    if y0 == 0:
        logp = (2 * k * np.log(y) - y * y / (2 * t) - nu * math.log(2.0)
                - gammaln(k + 0.5) - (k + 0.5) * math.log(t))
        out = np.exp(logp)
    else:
        z = y0 * y / t
        # exp(-(y0^2+y^2)/2t) I_nu(z) = exp(-(y-y0)^2/2t) ive(nu, z)
        out = (y / t) * (y / y0) ** nu * np.exp(-(y - y0) ** 2 / (2 * t)) * bessel_ive(nu, z)
    return float(out) if out.ndim == 0 else out


def exact_bessel_cdf(y0, t, y, k):
    """CDF of ``Y_t`` (via scipy's noncentral chi-squared)."""
    from scipy.stats import chi2, ncx2

    y = np.asarray(y, dtype=float)
    q = y * y / t
    if y0 == 0:
        return chi2.cdf(q, 2 * k + 1)
    return ncx2.cdf(q, 2 * k + 1, y0 * y0 / t)


def normalization_constant(params):
    """Normalizing constant of the transition density, for N <= 2 only.

    Computed by quadrature of ``exp(-|y|**2/2) D(0, y) w(y)**(2k)`` over the
    chamber, where ``D(0, y)`` equals its envelope value (N! or 2**N N!).
    Diagnostic; nothing downstream depends on it.
    """
    from .model import dunkl_bessel_envelope, weight

    n = params.n_particles
    if n > 2:
        raise NotImplementedError("quadrature diagnostic is limited to N <= 2")
    d0, _ = dunkl_bessel_envelope(params, np.zeros(n), np.zeros(n))
    k = params.k
    if n == 1:
        a = params.alpha
        val, _ = integrate.quad(lambda y: math.exp(-y * y / 2) * y ** (2 * k * a), 0, math.inf)
        return d0 * val
    if params.is_type_b:
        f = lambda y2, y1: math.exp(-(y1 * y1 + y2 * y2) / 2) * weight(params, (y1, y2)) ** (2 * k)
        val, _ = integrate.dblquad(f, 0, math.inf, lambda y1: y1, lambda y1: math.inf,
                                   epsabs=1e-11, epsrel=1e-9)
        return d0 * val
    # type A: integrate the centre of mass analytically, the gap numerically
    f = lambda g: math.exp(-g * g / 4) * g ** (2 * k)
    val, _ = integrate.quad(f, 0, math.inf, epsabs=1e-12, epsrel=1e-10)
    return d0 * math.sqrt(2 * math.pi) * val / math.sqrt(2.0)


# -- self-similarity ----------------------------------------------------------

def _statistic(params, states, statistic):
    if callable(statistic):
        return np.asarray(statistic(states))
    if statistic == "norm":
        return np.linalg.norm(states, axis=-1)
    if statistic == "edge_distance":
        return edge_distance(params, states)
    raise ValueError(f"unknown statistic {statistic!r}")


def scaled_pair(params, t, c, n_samples, cfg=None, seed=0, *, statistic="norm",
                x0=None, threads=None):
    """Samples of ``S(X_{ct})`` and ``sqrt(c) * S(X_t)`` from the origin.

    The two arrays come from disjoint random streams.  Under 1/2
    self-similarity they have the same law.
    """
    if not (t > 0 and c > 0):
        raise ValueError("t and c must be positive")
    x0 = origin(params) if x0 is None else x0
    cfg = cfg or IntegratorConfig()
    a = simulate_ensemble(params, x0, [c * t], n_samples, cfg, seed, threads=threads)
    b = simulate_ensemble(params, x0, [t], n_samples, cfg, seed, threads=threads,
                          first_index=n_samples)
    sa = _statistic(params, a.states[:, 0, :], statistic)
    sb = math.sqrt(c) * _statistic(params, b.states[:, 0, :], statistic)
    return sa, sb


# -- export ------------------------------------------------------------------

PATH_MAGIC = b"BFPATH01"


def path_to_csv(path, file):
    """Write ``t, x_1..x_N`` rows with a header line."""
    n = path.params.n_particles
    header = ",".join(["t"] + [f"x_{i + 1}" for i in range(n)])
    data = np.column_stack([path.times, path.states])
    own = isinstance(file, (str, os.PathLike))
    fh = open(file, "w", newline="") if own else file
    try:
        fh.write(header + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    finally:
        if own:
            fh.close()


def _path_header(path):
    return {
        "params": path.params.to_dict(),
        "integrator": path.integrator.to_dict(),
        "seed": path.seed,
        "path_index": path.path_index,
        "stopped_at_R": path.stopped_at_R,
        "n_steps": path.n_steps,
        "zero_drift": path.zero_drift,
        "n_rows": int(path.times.size),
        "n_cols": int(path.params.n_particles + 1),
    }


def path_to_bytes(path):
    """Binary record: magic ``BFPATH01``, little-endian uint32 header length,
    UTF-8 JSON header, then ``n_rows x (1 + N)`` little-endian float64 values
    (rows ``t, x_1..x_N``)."""
    header = json.dumps(_path_header(path), sort_keys=True).encode()
    data = np.column_stack([path.times, path.states]).astype("<f8")
    return PATH_MAGIC + struct.pack("<I", len(header)) + header + data.tobytes()


def path_from_bytes(blob):
    if blob[:8] != PATH_MAGIC:
        raise ValueError("not a path record")
    (hlen,) = struct.unpack("<I", blob[8:12])
    header = json.loads(blob[12:12 + hlen].decode())
    data = np.frombuffer(blob[12 + hlen:], dtype="<f8").reshape(header["n_rows"], header["n_cols"])
    return PathSample(
        times=data[:, 0].copy(),
        states=data[:, 1:].copy(),
        params=ModelParams.from_dict(header["params"]),
        integrator=IntegratorConfig.from_dict(header["integrator"]),
        seed=header["seed"],
        path_index=header["path_index"],
        stopped_at_R=header["stopped_at_R"],
        n_steps=header["n_steps"],
        zero_drift=header["zero_drift"],
    )
