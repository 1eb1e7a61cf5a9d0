"""Root-system bookkeeping for multivariate Bessel processes.

Two families are supported:

* type A_{N-1} (Dyson model): particles ``x_1 <= ... <= x_N`` on the line,
  pairwise repulsion ``k / (x_i - x_j)``;
* type B_N (square root of the Wishart-Laguerre process): particles on the
  half line ``0 <= x_1 <= ... <= x_N`` with an extra repulsion ``k*alpha/x_i``
  from the origin and mirror-image repulsion ``k / (x_i + x_j)``.

All functions here are pure.  Functions taking a configuration accept a
:class:`Configuration`, a 1-d array of length N, or a stacked array of shape
``(..., N)``; in the last case they vectorize over the leading axes.
"""

from dataclasses import dataclass, field
from enum import Enum
from math import factorial

import numpy as np


class RootSystem(str, Enum):
    A = "A"
    B = "B"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        text = str(value).strip().upper()
        aliases = {"A": cls.A, "TYPEA": cls.A, "TYPE_A": cls.A,
                   "B": cls.B, "TYPEB": cls.B, "TYPE_B": cls.B}
        try:
            return aliases[text]
        except KeyError:
            raise ValueError(f"unknown root system {value!r}; expected 'A' or 'B'") from None


class ChamberError(ValueError):
    """A configuration lies outside the closed Weyl chamber."""


class SingularityError(ArithmeticError):
    """The drift was requested on the chamber boundary."""


@dataclass(frozen=True)
class ModelParams:
    """Root system, particle count and multiplicities.

    ``alpha`` is only meaningful for type B and must be left at its default
    (``None``) or set to a positive value.
    """

    root_system: RootSystem
    n_particles: int
    k: float
    alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "root_system", RootSystem.parse(self.root_system))
        n = self.n_particles
        if isinstance(n, bool) or int(n) != n:
            raise ValueError(f"n_particles must be an integer, got {n!r}")
        object.__setattr__(self, "n_particles", int(n))
        if not np.isfinite(self.k) or self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k}")
        object.__setattr__(self, "k", float(self.k))
        if self.root_system is RootSystem.A:
            if self.n_particles < 2:
                raise ValueError("type A needs n_particles >= 2")
            if self.alpha is not None:
                raise ValueError("alpha is only defined for type B")
        else:
            if self.n_particles < 1:
                raise ValueError("type B needs n_particles >= 1")
            if self.alpha is None or not np.isfinite(self.alpha) or self.alpha <= 0:
                raise ValueError(f"type B needs alpha > 0, got {self.alpha}")
            object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def is_type_b(self):
        return self.root_system is RootSystem.B

    @property
    def k_prime(self):
        return k_prime(self)

    @property
    def kappa(self):
        return kappa(self)

    def to_dict(self):
        d = {"root_system": self.root_system.value, "n_particles": self.n_particles, "k": self.k}
        if self.alpha is not None:
            d["alpha"] = self.alpha
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["root_system"], d["n_particles"], d["k"], d.get("alpha"))


def type_a(n_particles, k):
    return ModelParams(RootSystem.A, n_particles, k)


def type_b(n_particles, k, alpha):
    return ModelParams(RootSystem.B, n_particles, k, alpha)


@dataclass(frozen=True, eq=False)
class Configuration:
    """Ordered particle positions (a point of the closed chamber).

    Input is sorted on construction; ``permuted`` records whether sorting
    changed the order.
    """

    coords: np.ndarray
    permuted: bool = field(default=False)

    def __post_init__(self):
        raw = np.array(self.coords, dtype=float).reshape(-1)
        if raw.size == 0:
            raise ValueError("a configuration needs at least one coordinate")
        if not np.all(np.isfinite(raw)):
            raise ValueError("configuration coordinates must be finite")
        order = np.argsort(raw, kind="stable")
        permuted = bool(np.any(order != np.arange(raw.size)))
        coords = raw[order]
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "permuted", permuted or self.permuted)

    def __len__(self):
        return self.coords.size

    def __array__(self, dtype=None, copy=None):
        return self.coords if dtype is None else self.coords.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())

    def __repr__(self):
        return f"Configuration({self.coords.tolist()})"

    def in_open_chamber(self, params):
        return is_in_open_chamber(params, self.coords)


def origin(params):
    """The all-zero configuration, a point of the boundary for both families."""
    return Configuration(np.zeros(params.n_particles))


def _coords(params, x):
    arr = np.asarray(x.coords if isinstance(x, Configuration) else x, dtype=float)
    if arr.shape[-1:] != (params.n_particles,):
        raise ValueError(
            f"expected {params.n_particles} coordinates, got shape {arr.shape}"
        )
    return arr


def _check_closed(params, arr):
    if np.any(np.diff(arr, axis=-1) < 0):
        raise ChamberError("coordinates are not weakly increasing")
    if params.is_type_b and np.any(arr[..., 0] < 0):
        raise ChamberError("type B needs x_1 >= 0")


def is_in_closed_chamber(params, x):
    arr = _coords(params, x)
    ok = np.all(np.diff(arr, axis=-1) >= 0, axis=-1)
    if params.is_type_b:
        ok = ok & (arr[..., 0] >= 0)
    return ok


def is_in_open_chamber(params, x):
    arr = _coords(params, x)
    ok = np.all(np.diff(arr, axis=-1) > 0, axis=-1)
    if params.is_type_b:
        ok = ok & (arr[..., 0] > 0)
    return ok


def k_prime(params):
    """Effective collision parameter: k for type A, k*min(1, alpha) for type B."""
    if params.is_type_b:
        return params.k * min(1.0, params.alpha)
    return params.k


def kappa(params):
    """Sum of multiplicities: kN(N-1)/2 (A) or kN(N+alpha-1) (B)."""
    n, k = params.n_particles, params.k
    if params.is_type_b:
        return k * n * (n + params.alpha - 1)
    return k * n * (n - 1) / 2


def weight_scaling_exponent(params):
    """Homogeneity degree of the weight: ``w(c x) = c**deg * w(x)``."""
    n = params.n_particles
    if params.is_type_b:
        return params.alpha * n + n * (n - 1)
    return n * (n - 1) / 2


def _weight_factors(params, arr):
    """Factors whose product is the weight, stacked on the last axis."""
    n = params.n_particles
    iu, ju = np.triu_indices(n, k=1)
    if params.is_type_b:
        pair = arr[..., ju] ** 2 - arr[..., iu] ** 2
        return arr, pair
    return None, arr[..., ju] - arr[..., iu]


def log_weight(params, x):
    """Natural log of the weight; ``-inf`` on the boundary."""
    arr = _coords(params, x)
    _check_closed(params, arr)
    single, pair = _weight_factors(params, arr)
    with np.errstate(divide="ignore"):
        out = np.sum(np.log(pair), axis=-1)
        if single is not None:
            out = out + params.alpha * np.sum(np.log(single), axis=-1)
    return out


def weight(params, x):
    """Vandermonde-type weight, zero exactly on the chamber boundary.

    Type A: prod_{i<j} (x_j - x_i).
    Type B: prod_l x_l**alpha * prod_{i<j} (x_j**2 - x_i**2).
    For N > 4 the product is accumulated in log space.
    """
    arr = _coords(params, x)
    _check_closed(params, arr)
    if params.n_particles > 4:
        lw = log_weight(params, arr)
        out = np.exp(lw)
        return float(out) if np.ndim(out) == 0 else out
    single, pair = _weight_factors(params, arr)
    out = np.prod(pair, axis=-1)
    if single is not None:
        out = out * np.prod(single ** params.alpha, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def edge_distance(params, x):
    """Distance to the nearest collision.

    Smallest gap ``x_{i+1} - x_i``; for type B also ``x_1`` itself.  A point
    belongs to the edge set of thickness r iff this is <= r, and to the
    boundary iff it is 0.
    """
    arr = _coords(params, x)
    _check_closed(params, arr)
    gaps = np.diff(arr, axis=-1)
    if params.is_type_b:
        gaps = np.concatenate([arr[..., :1], gaps], axis=-1)
    out = np.min(gaps, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def in_edge_set(params, x, r):
    if r < 0:
        raise ValueError("edge thickness must be nonnegative")
    return edge_distance(params, x) <= r


def drift(params, x):
    """Drift vector of the SDE at an interior configuration.

    Raises :class:`SingularityError` if any denominator vanishes.
    """
    arr = _coords(params, x)
    _check_closed(params, arr)
    diff = arr[..., :, None] - arr[..., None, :]
    n = params.n_particles
    off = ~np.eye(n, dtype=bool)
    if np.any(diff[..., off] == 0):
        raise SingularityError("drift is singular: two particles coincide")
    with np.errstate(divide="ignore"):
        inv = np.where(off, 1.0 / np.where(off, diff, 1.0), 0.0)
    out = params.k * inv.sum(axis=-1)
    if params.is_type_b:
        if np.any(arr == 0):
            raise SingularityError("drift is singular: a particle sits at the origin")
        summ = arr[..., :, None] + arr[..., None, :]
        out = out + params.k * np.where(off, 1.0 / np.where(off, summ, 1.0), 0.0).sum(axis=-1)
        out = out + params.k * params.alpha / arr
    return out


def dunkl_bessel_envelope(params, x, y):
    """Lower and upper exponential envelopes of the Dunkl-Bessel kernel.

    Returns ``(c*exp(-|x||y|), c*exp(|x||y|))`` with ``c = N!`` (type A) or
    ``2**N * N!`` (type B).
    """
    xa = _coords(params, x)
    ya = _coords(params, y)
    _check_closed(params, xa)
    _check_closed(params, ya)
    n = params.n_particles
    const = float(factorial(n))
    if params.is_type_b:
        const *= 2.0**n
    prod = np.linalg.norm(xa, axis=-1) * np.linalg.norm(ya, axis=-1)
    lower, upper = const * np.exp(-prod), const * np.exp(prod)
    if np.ndim(prod) == 0:
        return float(lower), float(upper)
    return lower, upper
