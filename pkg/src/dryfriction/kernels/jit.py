"""numba implementations of the hot loops.

Every function here has a twin with the same signature in
:mod:`dryfriction.kernels.vectorized`. Arithmetic is written in the same
order in both so that obstacle strengths and nearest distances agree bit for
bit; summed quantities (energies) agree to rounding.
"""
import math

import numpy as np
from numba import njit

from ._codes import (
    BACKEND_PROX,
    ESCAPED,
    FORCE_CONSTANT,
    FORCE_CYCLE,
    N_ROW,
    NONFINITE,
    REG_MAXITER,
    REG_TOL,
    ROW_ENERGY,
    ROW_EXCESS,
    ROW_MAX,
    ROW_MEAN,
    ROW_MIN,
    ROW_T,
    SEG_CORE,
    SEG_GAP,
    SKIP_SLACK,
    STATIONARY,
    TIMEOUT,
)


@njit(cache=True)
def _wrap(x):
    return x - math.floor(x)


@njit(cache=True)
def _lateral_gap(a, b):
    d = abs(a - b)
    return min(d, 1.0 - d)


@njit(cache=True)
def _cell_range(ix, k, count):
    # returns (first, number of cells) along one periodic axis
    if 2 * k + 1 >= count:
        return 0, count
    return ix - k, 2 * k + 1


@njit(cache=True)
def nearest_within(x0, x1, h, radius, centers, cell_start, gi, gf):
    """Smallest center distance not exceeding ``radius``; ``inf`` otherwise."""
    n = gi[0]
    n_lat = gi[1]
    n_v = gi[2]
    Y = gf[2]
    edge_lat = gf[3]
    edge_v = gf[4]
    if centers.shape[0] == 0:
        return np.inf
    x0 = _wrap(x0)
    ix0 = min(int(x0 / edge_lat), n_lat - 1)
    if n == 2:
        x1 = _wrap(x1)
        ix1 = min(int(x1 / edge_lat), n_lat - 1)
        n_lat1 = n_lat
    else:
        ix1 = 0
        n_lat1 = 1
    k_lat = int(math.ceil(radius / edge_lat))
    k_v = int(math.ceil(radius / edge_v))
    iy = int(math.floor((h + Y) / edge_v))
    lo_y = max(iy - k_v, 0)
    hi_y = min(iy + k_v, n_v - 1)
    start0, cnt0 = _cell_range(ix0, k_lat, n_lat)
    if n == 2:
        start1, cnt1 = _cell_range(ix1, k_lat, n_lat)
    else:
        start1, cnt1 = 0, 1
    best = np.inf
    for a in range(cnt0):
        j0 = (start0 + a) % n_lat
        for b in range(cnt1):
            j1 = (start1 + b) % n_lat1
            base = (j0 * n_lat1 + j1) * n_v
            for jy in range(lo_y, hi_y + 1):
                c = base + jy
                for p in range(cell_start[c], cell_start[c + 1]):
                    d0 = _lateral_gap(x0, centers[p, 0])
                    if n == 2:
                        d1 = _lateral_gap(x1, centers[p, 1])
                        dh = h - centers[p, 2]
                        d2 = (d0 * d0 + d1 * d1) + dh * dh
                    else:
                        dh = h - centers[p, 1]
                        d2 = d0 * d0 + dh * dh
                    if d2 < best:
                        best = d2
    # sqrt is monotone: sqrt(min d^2) == min sqrt(d^2) bit for bit
    best = math.sqrt(best)
    if best > radius:
        return np.inf
    return best


@njit(cache=True, inline="always")
def smooth_ramp(d, rho, delta):
    t = (rho + delta - d) / (2.0 * delta)
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    return t * t * (3.0 - 2.0 * t)


@njit(cache=True)
def nearest_distance(point, centers, cell_start, gi, gf):
    reach = gf[0] + gf[1]
    if gi[0] == 2:
        return nearest_within(point[0], point[1], point[2], reach, centers, cell_start, gi, gf)
    return nearest_within(point[0], 0.0, point[1], reach, centers, cell_start, gi, gf)


@njit(cache=True)
def _phi_at(x0, x1, h, centers, cell_start, gi, gf):
    reach = gf[0] + gf[1]
    d = nearest_within(x0, x1, h, reach, centers, cell_start, gi, gf)
    return smooth_ramp(d, gf[0], gf[1])


@njit(cache=True)
def locate_segment(i, h, seg_start, seg_bounds):
    """Index of the segment of node ``i`` containing height ``h``.

    Node ``i`` owns segments ``seg_start[i] <= j < seg_start[i+1]``; segment
    ``j`` covers ``[seg_bounds[j+i], seg_bounds[j+i+1])``.
    """
    lo = seg_start[i]
    hi = seg_start[i + 1] - 1
    while lo < hi:
        mid = (lo + hi + 1) >> 1
        if seg_bounds[mid + i] <= h:
            lo = mid
        else:
            hi = mid - 1
    return lo


@njit(cache=True, inline="always")
def segment_phi(i, h, sp, seg_bounds, seg_kind, cand_start, cand_h, cand_l2, rho, delta):
    """Strength at node ``i`` and height ``h``; moves the cursor ``sp[i]``.

    Segments of kind ``SEG_GAP``/``SEG_CORE`` are certified to give exactly
    0/1. In ``SEG_RAMP`` segments the minimum squared distance is taken over
    the centers whose support overlaps the segment, which contains the
    nearest one, so the value equals the full search bit for bit.
    """
    j = sp[i]
    while h < seg_bounds[j + i]:
        j -= 1
    while h >= seg_bounds[j + i + 1]:
        j += 1
    sp[i] = j
    kind = seg_kind[j]
    if kind == SEG_GAP:
        return 0.0
    if kind == SEG_CORE:
        return 1.0
    best = np.inf
    for q in range(cand_start[j], cand_start[j + 1]):
        dh = h - cand_h[q]
        d2 = cand_l2[q] + dh * dh
        if d2 < best:
            best = d2
    reach = rho + delta
    # the relative margins keep these shortcuts bitwise equal to the ramp
    if best > reach * reach * (1.0 + 1e-12):
        return 0.0
    core = rho - delta
    if best < core * core * (1.0 - 1e-12):
        return 1.0
    d = math.sqrt(best)
    if d > reach:
        return 0.0
    return smooth_ramp(d, rho, delta)


@njit(cache=True)
def phi_nodes(u, xs, centers, cell_start, gi, gf, out):
    two_d = gi[0] == 2
    for i in range(u.shape[0]):
        x1 = xs[i, 1] if two_d else 0.0
        out[i] = _phi_at(xs[i, 0], x1, u[i], centers, cell_start, gi, gf)
    return out


@njit(cache=True, inline="always")
def soft_threshold(g, phi):
    if g > phi:
        return g - phi
    if g < -phi:
        return g + phi
    return 0.0


@njit(cache=True)
def regularized_velocity(g, phi, eps):
    if phi == 0.0 or g == 0.0:
        return g
    sgn = 1.0
    if g < 0.0:
        sgn = -1.0
        g = -g
    # residual r(a) = a + phi*a/sqrt(a^2+eps^2) - g is increasing and concave
    # on a >= 0, so Newton started left of the root climbs monotonically.
    lo = max(g - phi, 0.0)
    hi = g
    a = lo
    for _ in range(REG_MAXITER):
        s = math.sqrt(a * a + eps * eps)
        r = a + phi * a / s - g
        if r == 0.0:
            return sgn * a
        if r > 0.0:
            hi = a
        else:
            lo = a
        dr = 1.0 + phi * eps * eps / (s * s * s)
        nxt = a - r / dr
        if not (lo <= nxt <= hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - a) <= REG_TOL * 0.1 or hi - lo <= REG_TOL:
            return sgn * nxt
        a = nxt
    raise RuntimeError("regularized velocity solve did not converge")


@njit(cache=True)
def forcing_value(kind, params, times, values, t):
    if kind == FORCE_CONSTANT:
        return params[0]
    if kind == FORCE_CYCLE:
        amp = params[0]
        period = params[1]
        s = t / period
        s = s - math.floor(s)
        if s < 0.25:
            return amp * (4.0 * s)
        if s < 0.75:
            return amp * (2.0 - 4.0 * s)
        return amp * (4.0 * s - 4.0)
    # tabulated, piecewise linear, clamped at the ends
    npts = times.shape[0]
    if t <= times[0]:
        return values[0]
    if t >= times[npts - 1]:
        return values[npts - 1]
    j = np.searchsorted(times, t, side="right") - 1
    w = (t - times[j]) / (times[j + 1] - times[j])
    return values[j] + w * (values[j + 1] - values[j])


@njit(cache=True, inline="always")
def _prev(i, m):
    return i - 1 if i > 0 else m - 1


@njit(cache=True, inline="always")
def _next(i, m):
    return i + 1 if i < m - 1 else 0


@njit(cache=True, inline="always")
def _neighbour_sum(u, i, m, n):
    if n == 1:
        s = u[_prev(i, m)]
        s = s + u[_next(i, m)]
        return s
    r = i // m
    c = i - r * m
    s = u[_prev(r, m) * m + c]
    s = s + u[_next(r, m) * m + c]
    s = s + u[r * m + _prev(c, m)]
    s = s + u[r * m + _next(c, m)]
    return s


@njit(cache=True)
def laplacian(u, m, n, h2, out):
    two_n = 2.0 * n
    for i in range(u.shape[0]):
        out[i] = (_neighbour_sum(u, i, m, n) - two_n * u[i]) / h2
    return out


@njit(cache=True)
def energy_terms(u, m, n, h2, hn, f_t, lateral_f):
    dir_sum = 0.0
    load_sum = 0.0
    for i in range(u.shape[0]):
        if n == 1:
            d = u[(i + 1) % m] - u[i]
            dir_sum += d * d
        else:
            r = i // m
            c = i - r * m
            d = u[((r + 1) % m) * m + c] - u[i]
            e = u[r * m + (c + 1) % m] - u[i]
            dir_sum += d * d + e * e
        load_sum += (f_t + lateral_f[i]) * u[i]
    return 0.5 * hn * dir_sum / h2, hn * load_sum


@njit(cache=True)
def run(
    u0, t0, dt, max_steps, m, n, h2, hn,
    table, rho, delta, frozen_phi, use_frozen,
    fkind, fparams, ftimes, fvalues, lateral_f, f_rate,
    backend, eps, tol_pin, dwell_steps, stop_stationary,
    escape_up, escape_down, check_escape, stride, record_states,
):
    """Explicit time loop; see :func:`dryfriction.solver.run_until`.

    ``table`` is the per-node lookup tuple built by
    :meth:`ObstacleField.node_table`. Returns ``(u, k, outcome, rows,
    n_rows, snaps)`` where ``u`` is the state after ``k`` steps, the one the
    stopping rule was evaluated on.

    When stationarity is not a stopping rule, a prox state with every
    velocity zero is fast-forwarded: with ``|df/dt| <= f_rate`` no node can
    leave the pinned band before ``f`` moved by the smallest margin
    ``phi - |g|``, so those steps leave ``u`` unchanged and only their rows
    are emitted.
    """
    seg_start, seg_bounds, seg_kind, cand_start, cand_h, cand_l2 = table[3:]
    M = u0.shape[0]
    u = u0.copy()
    un = np.empty(M)
    phi = np.empty(M)
    sp = np.empty(M, dtype=np.int64)
    cap = max_steps // stride + 2
    rows = np.zeros((cap, N_ROW))
    snaps = np.zeros((cap if record_states else 0, M))
    n_rows = 0
    dwell = 0
    two_n = 2.0 * n
    for i in range(M):
        if use_frozen:
            phi[i] = frozen_phi[i]
        else:
            sp[i] = locate_segment(i, u[i], seg_start, seg_bounds)
            phi[i] = segment_phi(i, u[i], sp, seg_bounds, seg_kind, cand_start, cand_h, cand_l2, rho, delta)
    k = 0
    while True:
        t = t0 + k * dt
        f_t = forcing_value(fkind, fparams, ftimes, fvalues, t)
        max_excess = 0.0
        umin = np.inf
        umax = -np.inf
        usum = 0.0
        all_pinned = True
        margin = np.inf
        # one fused pass: residual, velocity and reductions on u, next
        # heights into un, strengths at the next heights into phi
        for i in range(M):
            ui = u[i]
            if not math.isfinite(ui):
                return u, k, NONFINITE, rows, n_rows, snaps
            g = (_neighbour_sum(u, i, m, n) - two_n * ui) / h2 + (f_t + lateral_f[i])
            p = phi[i]
            if backend == BACKEND_PROX:
                a = soft_threshold(g, p)
            else:
                a = regularized_velocity(g, p, eps)
            ex = abs(g) - p
            if a != 0.0:
                all_pinned = False
            elif -ex < margin:
                margin = -ex
            if ex > max_excess:
                max_excess = ex
            usum += ui
            if ui < umin:
                umin = ui
            if ui > umax:
                umax = ui
            v = ui + dt * a
            un[i] = v
            if v != ui and not use_frozen:
                phi[i] = segment_phi(i, v, sp, seg_bounds, seg_kind, cand_start, cand_h, cand_l2, rho, delta)
        done = False
        outcome = TIMEOUT
        if check_escape and (umin >= escape_up or umax <= escape_down):
            outcome = ESCAPED
            done = True
        elif stop_stationary:
            if max_excess <= tol_pin:
                dwell += 1
                if dwell >= dwell_steps:
                    outcome = STATIONARY
                    done = True
            else:
                dwell = 0
        if not done and k >= max_steps:
            done = True
        if k % stride == 0 or done:
            dsum, lsum = energy_terms(u, m, n, h2, hn, f_t, lateral_f)
            rows[n_rows, ROW_T] = t
            rows[n_rows, ROW_MEAN] = usum / M
            rows[n_rows, ROW_MIN] = umin
            rows[n_rows, ROW_MAX] = umax
            rows[n_rows, ROW_EXCESS] = max_excess
            rows[n_rows, ROW_ENERGY] = dsum - lsum
            if record_states:
                snaps[n_rows, :] = u
            n_rows += 1
        if done:
            return u, k, outcome, rows, n_rows, snaps
        u, un = un, u
        if all_pinned and backend == BACKEND_PROX and not stop_stationary and margin > SKIP_SLACK:
            if f_rate > 0.0:
                free = (margin - SKIP_SLACK) / (f_rate * dt)
                s = 1 + int(min(free, 1e15))
            else:
                s = max_steps
            last = min(k + s, max_steps)
            for j in range(k + 1, last):
                if j % stride == 0:
                    t = t0 + j * dt
                    f_t = forcing_value(fkind, fparams, ftimes, fvalues, t)
                    dsum, lsum = energy_terms(u, m, n, h2, hn, f_t, lateral_f)
                    rows[n_rows, ROW_T] = t
                    rows[n_rows, ROW_MEAN] = usum / M
                    rows[n_rows, ROW_MIN] = umin
                    rows[n_rows, ROW_MAX] = umax
                    rows[n_rows, ROW_EXCESS] = 0.0
                    rows[n_rows, ROW_ENERGY] = dsum - lsum
                    if record_states:
                        snaps[n_rows, :] = u
                    n_rows += 1
            k = max(last, k + 1)
        else:
            k += 1
