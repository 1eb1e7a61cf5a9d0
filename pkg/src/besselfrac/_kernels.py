"""Compiled integrator kernels (numba, GIL released).

Root system is encoded as ``kind`` (0 = A, 1 = B) and the scheme as
``scheme`` (0 = Euler, 1 = tamed Euler, 2 = drift-implicit Euler).  All
kernels advance a single path at a time; ensembles loop over path indices so
that every path owns the stream keyed by ``(seed, path_index)``.
"""

import math

import numpy as np
from numba import njit

from .rng import normal_nb, seed_stream_nb

# status codes returned by the kernels
OK = 0
NONFINITE = 1

EULER = 0
TAMED = 1
IMPLICIT = 2

_NEWTON_MAXIT = 60


@njit(cache=True, nogil=True, inline="always")
def edge_distance_nb(x, kind):
    n = x.shape[0]
    d = math.inf
    if kind == 1:
        d = x[0]
    for i in range(n - 1):
        g = x[i + 1] - x[i]
        if g < d:
            d = g
    return d


@njit(cache=True, nogil=True, inline="always")
def _norm_nb(x):
    return math.sqrt(_norm2_nb(x))


@njit(cache=True, nogil=True, inline="always")
def _norm2_nb(x):
    s = 0.0
    for i in range(x.shape[0]):
        s += x[i] * x[i]
    return s


@njit(cache=True, nogil=True, inline="always")
def drift_nb(x, kind, k, alpha, r_floor, out, work):
    """Drift at ``x`` nudged so every gap (and x_1 for type B) is >= r_floor."""
    n = x.shape[0]
    if kind == 1:
        work[0] = max(x[0], r_floor)
    else:
        work[0] = x[0]
    for i in range(1, n):
        work[i] = max(x[i], work[i - 1] + r_floor)
    for i in range(n):
        s = 0.0
        xi = work[i]
        for j in range(n):
            if j != i:
                s += 1.0 / (xi - work[j])
                if kind == 1:
                    s += 1.0 / (xi + work[j])
        if kind == 1:
            s += alpha / xi
        out[i] = k * s


@njit(cache=True, nogil=True, inline="always")
def _sort_inplace(x):
    # insertion sort: states are nearly sorted after one step
    n = x.shape[0]
    for i in range(1, n):
        v = x[i]
        j = i - 1
        while j >= 0 and x[j] > v:
            x[j + 1] = x[j]
            j -= 1
        x[j + 1] = v


@njit(cache=True, nogil=True)
def _log_potential(x, kind, k, alpha):
    # U(x) = k sum_{i<j} log(x_j - x_i) [+ k sum log(x_j + x_i) + k alpha sum log x_i]
    n = x.shape[0]
    u = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            u += math.log(x[j] - x[i])
            if kind == 1:
                u += math.log(x[j] + x[i])
        if kind == 1:
            u += alpha * math.log(x[i])
    return k * u


@njit(cache=True, nogil=True, inline="always")
def _interior(x, kind):
    n = x.shape[0]
    if kind == 1 and not x[0] > 0.0:
        return False
    for i in range(n - 1):
        if not x[i + 1] > x[i]:
            return False
    return True


@njit(cache=True, nogil=True)
def implicit_solve(a, dt, kind, k, alpha, x, grad, hess, delta, trial):
    """Solve ``x = a + dt * drift(x)`` inside the open chamber.

    The drift is the gradient of the concave potential ``U`` above, so the
    solution is the unique minimizer of ``|x - a|**2 / 2 - dt * U(x)`` over
    the open chamber, for any ``a`` (not necessarily ordered); it is found
    by damped Newton iterations.  Returns the number of iterations, or -1
    if the iteration did not converge.
    """
    n = a.shape[0]
    if n == 1 and kind == 1:
        c = k * alpha * dt
        x[0] = 0.5 * (a[0] + math.sqrt(a[0] * a[0] + 4.0 * c))
        return 1
    # start from the ordered point pushed apart to the scale sqrt(k dt)
    eps = 0.5 * math.sqrt(k * dt)
    for i in range(n):
        x[i] = abs(a[i]) if kind == 1 else a[i]
    _sort_inplace(x)
    if kind == 1:
        x[0] = max(x[0], eps)
    for i in range(1, n):
        x[i] = max(x[i], x[i - 1] + eps)
    scale = 1.0
    for i in range(n):
        scale = max(scale, abs(a[i]))
    phi = 0.0
    for i in range(n):
        phi += 0.5 * (x[i] - a[i]) ** 2
    phi -= dt * _log_potential(x, kind, k, alpha)
    for it in range(_NEWTON_MAXIT):
        # gradient of the drift (Hessian of U) and the residual
        for i in range(n):
            grad[i] = 0.0
            for j in range(n):
                hess[i, j] = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                d = x[j] - x[i]
                g1 = 1.0 / d
                h1 = g1 * g1
                grad[i] -= g1
                grad[j] += g1
                hess[i, i] -= h1
                hess[j, j] -= h1
                hess[i, j] += h1
                hess[j, i] += h1
                if kind == 1:
                    s = x[j] + x[i]
                    g2 = 1.0 / s
                    h2 = g2 * g2
                    grad[i] += g2
                    grad[j] += g2
                    hess[i, i] -= h2
                    hess[j, j] -= h2
                    hess[i, j] -= h2
                    hess[j, i] -= h2
            if kind == 1:
                grad[i] += alpha / x[i]
                hess[i, i] -= alpha / (x[i] * x[i])
        res = 0.0
        for i in range(n):
            # residual F = x - a - dt * k * grad, Jacobian I - dt * k * hess
            delta[i] = -(x[i] - a[i] - dt * k * grad[i])
            res = max(res, abs(delta[i]))
            for j in range(n):
                hess[i, j] = -dt * k * hess[i, j]
            hess[i, i] += 1.0
        if res <= 1e-13 * scale:
            return it
        # Cholesky solve of the (positive definite) Jacobian system
        for j in range(n):
            v = hess[j, j]
            for m in range(j):
                v -= hess[j, m] * hess[j, m]
            v = math.sqrt(v)
            hess[j, j] = v
            for i in range(j + 1, n):
                w = hess[i, j]
                for m in range(j):
                    w -= hess[i, m] * hess[j, m]
                hess[i, j] = w / v
        for i in range(n):
            v = delta[i]
            for m in range(i):
                v -= hess[i, m] * delta[m]
            delta[i] = v / hess[i, i]
        for i in range(n - 1, -1, -1):
            v = delta[i]
            for m in range(i + 1, n):
                v -= hess[m, i] * delta[m]
            delta[i] = v / hess[i, i]
        dmax = 0.0
        for i in range(n):
            dmax = max(dmax, abs(delta[i]))
        if dmax <= 1e-15 * scale:
            return it
        # backtrack until inside the chamber with a lower objective (up to
        # the rounding level of phi)
        tol = 1e-12 * (1.0 + abs(phi))
        step = 1.0
        accepted = False
        for _ in range(60):
            for i in range(n):
                trial[i] = x[i] + step * delta[i]
            if _interior(trial, kind):
                phi_t = 0.0
                for i in range(n):
                    phi_t += 0.5 * (trial[i] - a[i]) ** 2
                phi_t -= dt * _log_potential(trial, kind, k, alpha)
                if phi_t <= phi + tol:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            return it
        for i in range(n):
            x[i] = trial[i]
        phi = phi_t
    return -1


@njit(cache=True, nogil=True)
def step_nb(x, state, kind, k, alpha, dt_max, gap_safety, r_floor,
            scheme, zero_drift, t_remaining, b, work, ws):
    """One adaptive step; returns the step length used.

    The step is ``min(dt_max, gap_safety * g**2, t_remaining)`` with
    ``g = max(edge distance, r_floor)``.  Explicit schemes move by the
    nudged drift plus Gaussian noise and then reflect type B coordinates at
    the origin and re-sort; the implicit scheme adds the noise and solves
    for the drift at the new position, which always lies in the open
    chamber.
    Returns a negative number if the new state is not finite.
    ``ws`` is an ``(n + 3, n)`` scratch array.
    """
    n = x.shape[0]
    g = edge_distance_nb(x, kind)
    if g < r_floor:
        g = r_floor
    dt = gap_safety * g * g
    if dt > dt_max:
        dt = dt_max
    if dt > t_remaining:
        dt = t_remaining
    sq = math.sqrt(dt)
    if scheme == IMPLICIT and not zero_drift:
        for i in range(n):
            work[i] = x[i] + sq * normal_nb(state)
        it = implicit_solve(work, dt, kind, k, alpha, x, b, ws[:n], ws[n],
                            ws[n + 1])
        if it < 0:
            return -dt
    else:
        if zero_drift:
            for i in range(n):
                b[i] = 0.0
        else:
            drift_nb(x, kind, k, alpha, r_floor, b, work)
            if scheme == TAMED:
                shift = _norm_nb(b) * dt
                if shift > g:
                    scale = g / shift
                    for i in range(n):
                        b[i] *= scale
        for i in range(n):
            x[i] += b[i] * dt + sq * normal_nb(state)
        if kind == 1:
            for i in range(n):
                x[i] = abs(x[i])
        _sort_inplace(x)
    for i in range(n):
        if not math.isfinite(x[i]):
            return -dt
    return dt


@njit(cache=True, nogil=True)
def ensemble_kernel(x0, seed, first, last, kind, k, alpha, dt_max, gap_safety,
                    r_floor, scheme, zero_drift, ball_radius, checkpoints,
                    win_lo, win_hi, occ_thresholds, occ_horizon, bridge_r,
                    bridge_rate, out_states, out_wmin, out_occ, out_stop,
                    out_steps, out_bridge, out_status):
    """Simulate paths ``first..last-1`` and reduce them on the fly.

    Per path: states at ``checkpoints`` (NaN from the exit time on), for each
    window ``[win_lo[j], win_hi[j]]`` the minimal edge distance over grid
    times inside it and before the exit time from the ball of radius
    ``ball_radius``, trapezoidal dwell time in each edge set of thickness
    ``occ_thresholds`` over ``[0, occ_horizon]``, the exit time (inf if
    never), the step count and, when ``bridge_r`` is finite, per window the
    log-probability that no Brownian bridge between consecutive grid points
    dips below ``bridge_r``.

    Every window edge must be one of the checkpoints.
    """
    n = x0.shape[0]
    n_ck = checkpoints.shape[0]
    n_occ = occ_thresholds.shape[0]
    n_win = win_lo.shape[0]
    state = np.empty(4, dtype=np.uint64)
    x = np.empty(n)
    b = np.empty(n)
    work = np.empty(n)
    ws = np.empty((n + 3, n))
    horizon = checkpoints[n_ck - 1]
    use_bridge = math.isfinite(bridge_r)
    use_ball = math.isfinite(ball_radius)
    ball2 = ball_radius * ball_radius
    for p in range(first, last):
        row = p - first
        seed_stream_nb(seed, p, state)
        for i in range(n):
            x[i] = x0[i]
        t = 0.0
        ci = 0
        stop = math.inf
        steps = 0
        status = OK
        for j in range(n_occ):
            out_occ[row, j] = 0.0
        for j in range(n_win):
            out_wmin[row, j] = math.inf
            out_bridge[row, j] = 0.0
        if use_ball and _norm2_nb(x) >= ball2:
            stop = 0.0
        ed = edge_distance_nb(x, kind)
        if stop > 0.0:
            for j in range(n_win):
                if win_lo[j] <= 0.0:
                    out_wmin[row, j] = ed
        while ci < n_ck and stop == math.inf:
            target = checkpoints[ci]
            ed_before = ed
            dt = step_nb(x, state, kind, k, alpha, dt_max, gap_safety,
                         r_floor, scheme, zero_drift, target - t, b, work, ws)
            steps += 1
            if dt < 0:
                status = NONFINITE
                break
            t_before = t
            t = t + dt
            if t >= target - 1e-15 * max(1.0, target):
                t = target
            ed = edge_distance_nb(x, kind)
            if t_before < occ_horizon:
                seg = min(t, occ_horizon) - t_before
                for j in range(n_occ):
                    thr = occ_thresholds[j]
                    v = 0.0
                    if ed_before <= thr:
                        v += 0.5
                    if ed <= thr:
                        v += 0.5
                    out_occ[row, j] += v * seg
            if use_ball and _norm2_nb(x) >= ball2:
                stop = t
            else:
                for j in range(n_win):
                    if win_lo[j] <= t <= win_hi[j]:
                        if ed < out_wmin[row, j]:
                            out_wmin[row, j] = ed
                        if use_bridge and t_before >= win_lo[j]:
                            a0 = ed_before - bridge_r
                            a1 = ed - bridge_r
                            if a0 > 0.0 and a1 > 0.0:
                                out_bridge[row, j] += math.log1p(
                                    -math.exp(-2.0 * a0 * a1 / (bridge_rate * dt)))
                            else:
                                out_bridge[row, j] = -math.inf
            while ci < n_ck and checkpoints[ci] <= t:
                for i in range(n):
                    out_states[row, ci, i] = x[i] if stop == math.inf else math.nan
                ci += 1
            if t >= horizon:
                break
        while ci < n_ck:
            for i in range(n):
                out_states[row, ci, i] = math.nan
            ci += 1
        out_stop[row] = stop
        out_steps[row] = steps
        out_status[row] = status
    return 0


@njit(cache=True, nogil=True)
def path_kernel(x, state, t, horizon, kind, k, alpha, dt_max,
                gap_safety, r_floor, scheme, zero_drift, ball_radius,
                record_spacing, last_recorded, buf_t, buf_x):
    """Advance one path, writing grid points into ``buf_t``/``buf_x``.

    Stops when the buffers are full, the horizon is reached, the path leaves
    the ball, or the state turns non-finite.  Returns ``(n_written, n_steps,
    t, last_recorded, flag)`` where flag is 0 (buffer full), 1 (horizon),
    2 (exit from the ball) or 3 (non-finite state; ``x`` then holds the
    offending state).
    """
    n = x.shape[0]
    cap = buf_t.shape[0]
    b = np.empty(n)
    work = np.empty(n)
    ws = np.empty((n + 3, n))
    w = 0
    steps = 0
    while w < cap:
        if t >= horizon:
            return w, steps, t, last_recorded, 1
        dt = step_nb(x, state, kind, k, alpha, dt_max, gap_safety,
                     r_floor, scheme, zero_drift, horizon - t, b, work, ws)
        if dt < 0:
            return w, steps, t - dt, last_recorded, 3
        steps += 1
        t = t + dt
        if t >= horizon - 1e-15 * max(1.0, horizon):
            t = horizon
        exited = _norm_nb(x) >= ball_radius
        if t - last_recorded >= record_spacing or t >= horizon or exited:
            buf_t[w] = t
            for i in range(n):
                buf_x[w, i] = x[i]
            w += 1
            last_recorded = t
        if exited:
            return w, steps, t, last_recorded, 2
    return w, steps, t, last_recorded, 0
