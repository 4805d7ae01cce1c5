"""Event-aware adaptive integrator for one hybrid domain.

Eighth-order Dormand-Prince stepping (the DOP853 pair) with the seventh-order
dense-output interpolant, plus guard localization: guards are sampled on a
sub-grid of every accepted step, armed once they are seen strictly on their
non-trigger side, and crossings are refined by bisection on the interpolant.
Guards closer in time than the simultaneity tolerance merge into one event
set, so exactly synchronized touchdowns (pronking) stay a single transition.
"""

import math

import numpy as np
from numba import njit

from . import _dynamics as dyn
from ._dop853 import A, B, C, D, E3, E5

N = 14
N_GUARDS = 9
APEX = 8

# return codes
OK_LIMIT = 0
OK_EVENT = 1
FAIL_INVALID = 2
FAIL_UNDERFLOW = 3
FAIL_BUFFER = 4
FAIL_STEPS = 5

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1.0 / 8.0
H_MIN = 1e-14
MAX_STEPS = 2_000_000
BISECT_TOL = 1e-14


@njit(cache=True, nogil=True)
def _dense_eval(F, y_old, x, out):
    # Horner-like evaluation alternating x and (1 - x) factors
    for k in range(N):
        out[k] = 0.0
    for i in range(7):
        row = F[6 - i]
        if i % 2 == 0:
            for k in range(N):
                out[k] = (out[k] + row[k]) * x
        else:
            for k in range(N):
                out[k] = (out[k] + row[k]) * (1.0 - x)
    for k in range(N):
        out[k] += y_old[k]


@njit(cache=True, nogil=True)
def _attempt_step(y, h, p, stance, anchors, K, y_new, y_tmp, rtol, atol):
    """One trial step from the current point; K[0] must hold f(y).

    Returns the scaled error norm (inf on non-finite results).
    """
    for s in range(1, 12):
        for k in range(N):
            acc = 0.0
            for j in range(s):
                aj = A[s, j]
                if aj != 0.0:
                    acc += aj * K[j, k]
            y_tmp[k] = y[k] + h * acc
        dyn.rhs(y_tmp, p, stance, anchors, K[s])

    for k in range(N):
        acc = 0.0
        for j in range(12):
            bj = B[j]
            if bj != 0.0:
                acc += bj * K[j, k]
        y_new[k] = y[k] + h * acc
    dyn.rhs(y_new, p, stance, anchors, K[12])

    err5_2 = 0.0
    err3_2 = 0.0
    for k in range(N):
        if not math.isfinite(y_new[k]):
            return math.inf
        scale = atol + rtol * max(abs(y[k]), abs(y_new[k]))
        e5 = 0.0
        e3 = 0.0
        for j in range(13):
            e5 += E5[j] * K[j, k]
            e3 += E3[j] * K[j, k]
        e5 /= scale
        e3 /= scale
        err5_2 += e5 * e5
        err3_2 += e3 * e3
    if err5_2 == 0.0 and err3_2 == 0.0:
        return 0.0
    denom = err5_2 + 0.01 * err3_2
    err = abs(h) * err5_2 / math.sqrt(denom * N)
    if not math.isfinite(err):
        return math.inf
    return err


@njit(cache=True, nogil=True)
def _dense_prepare(t, y, h, p, stance, anchors, K, y_new, y_tmp, F):
    # three extra stages for the order-7 interpolant
    for s in range(13, 16):
        for k in range(N):
            acc = 0.0
            for j in range(s):
                aj = A[s, j]
                if aj != 0.0:
                    acc += aj * K[j, k]
            y_tmp[k] = y[k] + h * acc
        dyn.rhs(y_tmp, p, stance, anchors, K[s])

    for k in range(N):
        delta = y_new[k] - y[k]
        F[0, k] = delta
        F[1, k] = h * K[0, k] - delta
        F[2, k] = 2.0 * delta - h * (K[12, k] + K[0, k])
    for i in range(4):
        for k in range(N):
            acc = 0.0
            for j in range(16):
                dj = D[i, j]
                if dj != 0.0:
                    acc += dj * K[j, k]
            F[3 + i, k] = h * acc


@njit(cache=True, nogil=True)
def _bisect_guard(F, y_old, xa, xb, guard, direction, p, stance, anchors,
                  y_bis, g_bis):
    """Refine a guard crossing inside (xa, xb] on the dense interpolant."""
    lo = xa
    hi = xb
    for _ in range(80):
        if hi - lo < 1e-15:
            break
        mid = 0.5 * (lo + hi)
        _dense_eval(F, y_old, mid, y_bis)
        dyn.guard_values(y_bis, p, stance, anchors, g_bis)
        if g_bis[guard] * direction >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


@njit(cache=True, nogil=True)
def integrate_domain(y, t0, t_limit, p, stance, anchors,
                     rtol, atol, h0, h_max,
                     active, direction, simul_tol, n_sub,
                     samp_t, samp_y,
                     grid_t, grid_y, grid_fill,
                     ev_mask, ev_time, td_descent_only):
    """Integrate one fixed-contact domain until an event or the time limit.

    ``y`` is updated in place to the final state. Accepted step endpoints are
    recorded into ``samp_t``/``samp_y`` and dense states at the global times
    in ``grid_t`` (consumed from ``grid_fill[0]`` onward) into ``grid_y``.

    Returns ``(status, t_end, h_next, n_samples)``.
    """
    K = np.empty((16, N), dtype=np.float64)
    F = np.empty((7, N), dtype=np.float64)
    y_new = np.empty(N, dtype=np.float64)
    y_tmp = np.empty(N, dtype=np.float64)
    y_bis = np.empty(N, dtype=np.float64)
    y_old = np.empty(N, dtype=np.float64)
    g_prev = np.empty(N_GUARDS, dtype=np.float64)
    g_cur = np.empty(N_GUARDS, dtype=np.float64)
    g_bis = np.empty(N_GUARDS, dtype=np.float64)
    armed = np.zeros(N_GUARDS, dtype=np.uint8)
    roots = np.full(N_GUARDS, -1.0, dtype=np.float64)

    for i in range(N_GUARDS):
        ev_mask[i] = 0
        ev_time[i] = -1.0

    t = t0
    h = min(h0, h_max)
    if h < H_MIN:
        h = H_MIN
    n_samp = 0
    cap = samp_t.shape[0]
    n_grid = grid_t.shape[0]

    dyn.guard_values(y, p, stance, anchors, g_prev)
    for i in range(N_GUARDS):
        if active[i] and g_prev[i] * direction[i] < 0.0:
            if (td_descent_only and i < 4 and not stance[i]
                    and y[8] > 0.0):
                continue
            armed[i] = 1

    dyn.rhs(y, p, stance, anchors, K[0])
    rejected = False

    for _step in range(MAX_STEPS):
        if t >= t_limit:
            return OK_LIMIT, t, h, n_samp
        if h > t_limit - t:
            h = t_limit - t
        err = _attempt_step(y, h, p, stance, anchors, K, y_new, y_tmp,
                            rtol, atol)
        if err > 1.0:
            factor = SAFETY * err ** ERROR_EXPONENT
            if not math.isfinite(factor) or factor < MIN_FACTOR:
                factor = MIN_FACTOR
            h *= factor
            if h < H_MIN:
                return FAIL_UNDERFLOW, t, h, n_samp
            rejected = True
            continue

        # accepted: build interpolant, scan guards on the sub-grid
        _dense_prepare(t, y, h, p, stance, anchors, K, y_new, y_tmp, F)
        t_new = t + h

        for i in range(N_GUARDS):
            roots[i] = -1.0
        any_root = False
        x_prev = 0.0
        for j in range(1, n_sub + 1):
            x = j / n_sub
            if j == n_sub:
                for k in range(N):
                    y_tmp[k] = y_new[k]
            else:
                _dense_eval(F, y, x, y_tmp)
            dyn.guard_values(y_tmp, p, stance, anchors, g_cur)
            for i in range(N_GUARDS):
                if not active[i] or roots[i] >= 0.0:
                    continue
                if (td_descent_only and i < 4 and not stance[i]
                        and y_tmp[8] > 0.0):
                    # swing-leg ground scuffs while the torso still rises
                    # are ignored; the guard re-arms on the way down once
                    # the foot is back above ground
                    armed[i] = 0
                    continue
                gi = g_cur[i]
                di = direction[i]
                if armed[i]:
                    if gi * di >= 0.0:
                        xr = _bisect_guard(F, y, x_prev, x, i, di, p,
                                           stance, anchors, y_bis, g_bis)
                        roots[i] = t + xr * h
                        any_root = True
                elif gi * di < 0.0:
                    armed[i] = 1
            x_prev = x

        if any_root:
            t_ev = math.inf
            for i in range(N_GUARDS):
                if roots[i] >= 0.0 and roots[i] < t_ev:
                    t_ev = roots[i]
            for i in range(N_GUARDS):
                if roots[i] >= 0.0 and roots[i] <= t_ev + simul_tol:
                    ev_mask[i] = 1
                    ev_time[i] = roots[i]
            x_ev = (t_ev - t) / h
            _dense_eval(F, y, x_ev, y_tmp)

            gf = grid_fill[0]
            while gf < n_grid and grid_t[gf] <= t_ev:
                xg = (grid_t[gf] - t) / h
                _dense_eval(F, y, xg, y_bis)
                for k in range(N):
                    grid_y[gf, k] = y_bis[k]
                gf += 1
            grid_fill[0] = gf

            for k in range(N):
                y[k] = y_tmp[k]
            if cap > 0:
                if n_samp >= cap:
                    return FAIL_BUFFER, t_ev, h, n_samp
                samp_t[n_samp] = t_ev
                for k in range(N):
                    samp_y[n_samp, k] = y[k]
                n_samp += 1
            if dyn.state_invalid(y, p, stance, anchors) != 0:
                return FAIL_INVALID, t_ev, h, n_samp
            return OK_EVENT, t_ev, h, n_samp

        # no event in this step
        gf = grid_fill[0]
        while gf < n_grid and grid_t[gf] <= t_new:
            xg = (grid_t[gf] - t) / h
            _dense_eval(F, y, xg, y_bis)
            for k in range(N):
                grid_y[gf, k] = y_bis[k]
            gf += 1
        grid_fill[0] = gf

        for k in range(N):
            y[k] = y_new[k]
        for i in range(N_GUARDS):
            g_prev[i] = g_cur[i]
        t = t_new
        if cap > 0:
            if n_samp >= cap:
                return FAIL_BUFFER, t, h, n_samp
            samp_t[n_samp] = t
            for k in range(N):
                samp_y[n_samp, k] = y[k]
            n_samp += 1

        if dyn.state_invalid(y, p, stance, anchors) != 0:
            return FAIL_INVALID, t, h, n_samp

        for k in range(N):
            K[0, k] = K[12, k]

        if err == 0.0:
            factor = MAX_FACTOR
        else:
            factor = SAFETY * err ** ERROR_EXPONENT
            if factor > MAX_FACTOR:
                factor = MAX_FACTOR
        if rejected and factor > 1.0:
            factor = 1.0
        rejected = False
        h *= factor
        if h > h_max:
            h = h_max

    return FAIL_STEPS, t, h, n_samp
