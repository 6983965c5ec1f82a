"""Pure-numpy implementations of the kernels in :mod:`.jit`.

Nearest-center queries are brute force over all centers (chunked), which
gives the same distances as the cell-list search in the jit path. The time
loop is a Python loop around vectorized per-step work.
"""
import math

import numpy as np

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
    SKIP_SLACK,
    STATIONARY,
    TIMEOUT,
)

_CHUNK = 4096


def _nearest(points, centers, n, reach):
    """Row-wise nearest distance from ``points`` (k, n+1) to ``centers``."""
    k = points.shape[0]
    out = np.full(k, np.inf)
    if centers.shape[0] == 0 or k == 0:
        return out
    x = points[:, :n] - np.floor(points[:, :n])
    for s in range(0, k, _CHUNK):
        sl = slice(s, s + _CHUNK)
        d0 = np.abs(x[sl, 0, None] - centers[None, :, 0])
        d0 = np.minimum(d0, 1.0 - d0)
        dh = points[sl, n, None] - centers[None, :, n]
        if n == 2:
            d1 = np.abs(x[sl, 1, None] - centers[None, :, 1])
            d1 = np.minimum(d1, 1.0 - d1)
            d2 = (d0 * d0 + d1 * d1) + dh * dh
        else:
            d2 = d0 * d0 + dh * dh
        out[sl] = np.sqrt(d2.min(axis=1))
    out[out > reach] = np.inf
    return out


def smooth_ramp(d, rho, delta):
    t = np.clip((rho + delta - np.asarray(d, dtype=float)) / (2.0 * delta), 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def nearest_distance(point, centers, cell_start, gi, gf):
    n = int(gi[0])
    return float(_nearest(np.asarray(point, dtype=float)[None, :], centers, n, gf[0] + gf[1])[0])


def pad_columns(col_start, col_h, col_l2):
    """Dense ``(M, width)`` copies of the candidate columns, padded with inf."""
    M = col_start.shape[0] - 1
    counts = np.diff(col_start)
    width = max(int(counts.max()) if M > 0 else 0, 1)
    rows = np.repeat(np.arange(M), counts)
    cols = np.arange(col_h.shape[0]) - np.repeat(col_start[:-1], counts)
    H = np.full((M, width), np.inf)
    L = np.full((M, width), np.inf)
    H[rows, cols] = col_h
    L[rows, cols] = col_l2
    return H, L


def column_phi_all(u, H, L, rho, delta):
    """Strength at every node from the padded candidate columns, by a full
    minimum over each column."""
    dh = u[:, None] - H
    d = np.sqrt(np.min(L + dh * dh, axis=1))
    d[d > rho + delta] = np.inf
    return smooth_ramp(d, rho, delta)


def phi_nodes(u, xs, centers, cell_start, gi, gf, out):
    n = int(gi[0])
    pts = np.empty((u.shape[0], n + 1))
    pts[:, :n] = xs[:, :n]
    pts[:, n] = u
    d = _nearest(pts, centers, n, gf[0] + gf[1])
    out[:] = smooth_ramp(d, gf[0], gf[1])
    return out


def soft_threshold(g, phi):
    g = np.asarray(g, dtype=float)
    return np.sign(g) * np.maximum(np.abs(g) - phi, 0.0)


def regularized_velocity(g, phi, eps):
    """Vectorized safeguarded Newton for ``a + phi*a/sqrt(a^2+eps^2) = g``."""
    g = np.asarray(g, dtype=float)
    phi = np.broadcast_to(np.asarray(phi, dtype=float), g.shape)
    sgn = np.where(g < 0.0, -1.0, 1.0)
    ga = np.abs(g)
    lo = np.maximum(ga - phi, 0.0)
    hi = ga.copy()
    a = lo.copy()
    active = (phi != 0.0) & (ga != 0.0)
    result = np.where(active, 0.0, ga)
    for _ in range(REG_MAXITER):
        if not active.any():
            return sgn * result
        idx = np.nonzero(active)[0]
        ai, pi, gi_ = a[idx], phi[idx], ga[idx]
        s = np.sqrt(ai * ai + eps * eps)
        r = ai + pi * ai / s - gi_
        hit = r == 0.0
        hi[idx] = np.where(r > 0.0, ai, hi[idx])
        lo[idx] = np.where(r < 0.0, ai, lo[idx])
        dr = 1.0 + pi * eps * eps / (s * s * s)
        nxt = ai - r / dr
        bad = ~((lo[idx] <= nxt) & (nxt <= hi[idx]))
        nxt = np.where(bad, 0.5 * (lo[idx] + hi[idx]), nxt)
        conv = (np.abs(nxt - ai) <= REG_TOL * 0.1) | (hi[idx] - lo[idx] <= REG_TOL)
        result[idx] = np.where(hit, ai, nxt)
        finished = hit | conv
        a[idx] = nxt
        active[idx[finished]] = False
    if active.any():
        raise RuntimeError("regularized velocity solve did not converge")
    return sgn * result


def forcing_value(kind, params, times, values, t):
    if kind == FORCE_CONSTANT:
        return float(params[0])
    if kind == FORCE_CYCLE:
        amp, period = float(params[0]), float(params[1])
        s = t / period
        s = s - math.floor(s)
        if s < 0.25:
            return amp * (4.0 * s)
        if s < 0.75:
            return amp * (2.0 - 4.0 * s)
        return amp * (4.0 * s - 4.0)
    if t <= times[0]:
        return float(values[0])
    if t >= times[-1]:
        return float(values[-1])
    j = int(np.searchsorted(times, t, side="right")) - 1
    w = (t - times[j]) / (times[j + 1] - times[j])
    return float(values[j] + w * (values[j + 1] - values[j]))


def _neighbour_sum(u, m, n):
    if n == 1:
        s = np.roll(u, 1)
        s = s + np.roll(u, -1)
        return s
    g = u.reshape(m, m)
    s = np.roll(g, 1, axis=0)
    s = s + np.roll(g, -1, axis=0)
    s = s + np.roll(g, 1, axis=1)
    s = s + np.roll(g, -1, axis=1)
    return s.reshape(-1)


def laplacian(u, m, n, h2, out):
    out[:] = (_neighbour_sum(u, m, n) - (2.0 * n) * u) / h2
    return out


def _seq_sum(x):
    # sequential left-to-right sum, the order of the jit loops
    return float(np.cumsum(x)[-1]) if x.size else 0.0


def energy_terms(u, m, n, h2, hn, f_t, lateral_f):
    if n == 1:
        d = np.roll(u, -1) - u
        dir_sum = _seq_sum(d * d)
    else:
        g = u.reshape(m, m)
        d = np.roll(g, -1, axis=0) - g
        e = np.roll(g, -1, axis=1) - g
        dir_sum = _seq_sum((d * d + e * e).reshape(-1))
    load_sum = _seq_sum((f_t + lateral_f) * u)
    return 0.5 * hn * dir_sum / h2, hn * load_sum


def run(
    u0, t0, dt, max_steps, m, n, h2, hn,
    table, rho, delta, frozen_phi, use_frozen,
    fkind, fparams, ftimes, fvalues, lateral_f, f_rate,
    backend, eps, tol_pin, dwell_steps, stop_stationary,
    escape_up, escape_down, check_escape, stride, record_states,
):
    M = u0.shape[0]
    u = u0.copy()
    phi = np.empty(M)
    cap = max_steps // stride + 2
    rows = np.zeros((cap, N_ROW))
    snaps = np.zeros((cap if record_states else 0, M))
    n_rows = 0
    dwell = 0
    if not use_frozen:
        H, L = pad_columns(*table[:3])
    k = 0
    while True:
        t = t0 + k * dt
        f_t = forcing_value(fkind, fparams, ftimes, fvalues, t)
        if not np.all(np.isfinite(u)):
            return u, k, NONFINITE, rows, n_rows, snaps
        g = (_neighbour_sum(u, m, n) - (2.0 * n) * u) / h2 + (f_t + lateral_f)
        if use_frozen:
            phi[:] = frozen_phi
        else:
            phi[:] = column_phi_all(u, H, L, rho, delta)
        if backend == BACKEND_PROX:
            vel = soft_threshold(g, phi)
        else:
            vel = regularized_velocity(g, phi, eps)
        max_excess = max(float(np.max(np.abs(g) - phi)), 0.0)
        umin = float(u.min())
        umax = float(u.max())
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
            rows[n_rows] = (t, _seq_sum(u) / M, umin, umax, max_excess, dsum - lsum)
            if record_states:
                snaps[n_rows] = u
            n_rows += 1
        if done:
            return u, k, outcome, rows, n_rows, snaps
        u = u + dt * vel
        # fast-forward through certified pinned steps, as in the jit loop
        if backend == BACKEND_PROX and not stop_stationary and not np.any(vel != 0.0):
            margin = float(np.min(phi - np.abs(g)))
            if margin > SKIP_SLACK:
                if f_rate > 0.0:
                    s = 1 + int(min((margin - SKIP_SLACK) / (f_rate * dt), 1e15))
                else:
                    s = max_steps
                last = min(k + s, max_steps)
                for j in range(k + 1, last):
                    if j % stride == 0:
                        tj = t0 + j * dt
                        fj = forcing_value(fkind, fparams, ftimes, fvalues, tj)
                        dsum, lsum = energy_terms(u, m, n, h2, hn, fj, lateral_f)
                        rows[n_rows] = (tj, _seq_sum(u) / M, umin, umax, 0.0, dsum - lsum)
                        if record_states:
                            snaps[n_rows] = u
                        n_rows += 1
                k = max(last, k + 1)
                continue
        k += 1
