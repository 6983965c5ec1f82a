"""Energies, the discrete dissipation balance, and stationary certificates.

With forward differences ``D+`` and the periodic Laplacian one has the exact
summation-by-parts identity ``h^n sum(D+u . D+v) = -h^n sum(u Lap v)``. For
one explicit step ``u' = u + dt a`` with constant ``f`` this gives

    E(u') - E(u) + dt h^n sum(a^2 + phi |a|) = dt^2/2 h^n sum |D+ a|^2

for the prox backend, so the dissipation residual is exactly second order in
``dt`` and ``E`` is nonincreasing whenever ``cfl <= 1``.
"""
from dataclasses import dataclass

import numpy as np

from . import serialize
from .errors import ContractError
from .solver import State, laplacian, node_phi


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    dirichlet: float
    load: float

    @property
    def total(self):
        return self.dirichlet - self.load


def _forward_sq(grid, u):
    """``sum |D+ u|^2`` with forward differences ``D+ u = (u_{i+1} - u_i) / h``."""
    if grid.n == 1:
        d = np.roll(u, -1) - u
        return float(np.sum(d * d)) / grid.h**2
    w = u.reshape(grid.m, grid.m)
    d0 = np.roll(w, -1, axis=0) - w
    d1 = np.roll(w, -1, axis=1) - w
    return float(np.sum(d0 * d0 + d1 * d1)) / grid.h**2


def energy(state, forcing, grid=None):
    """Dirichlet energy minus the load ``h^n sum f u`` at ``state.t``."""
    grid = state.grid if grid is None else grid
    if grid != state.grid:
        raise ContractError("state and grid differ")
    hn = grid.cell_volume
    f = forcing.at(grid, state.t)
    return EnergyRecord(
        t=float(state.t),
        dirichlet=0.5 * hn * _forward_sq(grid, state.u),
        load=hn * float(np.sum(f * state.u)),
    )


def dissipation_residual(pre, post, a, phi, forcing):
    """``|E(post) - E(pre) + dt h^n sum(a^2 + phi |a|)|`` for one step.

    The load of both states is evaluated with the forcing at ``pre.t``; the
    identity assumes time-constant forcing.
    """
    if pre.grid != post.grid:
        raise ContractError("pre and post states live on different grids")
    grid = pre.grid
    dt = post.t - pre.t
    a = np.asarray(a, dtype=float)
    phi = np.asarray(phi, dtype=float)
    f = forcing.at(grid, pre.t)
    hn = grid.cell_volume
    e_pre = 0.5 * hn * _forward_sq(grid, pre.u) - hn * float(np.sum(f * pre.u))
    e_post = 0.5 * hn * _forward_sq(grid, post.u) - hn * float(np.sum(f * post.u))
    return abs(e_post - e_pre + dt * hn * float(np.sum(a * a + phi * np.abs(a))))


# certificates -------------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    """Outcome of a pointwise stationary check; ``worst_margin <= tol`` iff ok."""

    ok: bool
    worst_node_index: int
    worst_margin: float
    tol: float

    def to_dict(self):
        return {
            "ok": bool(self.ok),
            "worst_node_index": int(self.worst_node_index),
            "worst_margin": float(self.worst_margin),
            "tol": float(self.tol),
        }

    def to_json(self):
        return serialize.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        return cls(bool(d["ok"]), int(d["worst_node_index"]), float(d["worst_margin"]), float(d["tol"]))


def _drive(w, field, f):
    if not isinstance(w, State):
        raise ContractError("certificate checks take a State")
    grid = w.grid
    fv = np.broadcast_to(np.asarray(f, dtype=float), (grid.size,))
    return laplacian(grid, w.u) + fv, node_phi(field, grid, w.u)


def _certificate(margin, tol):
    j = int(np.argmax(margin))
    worst = float(margin[j])
    return Certificate(worst <= tol, j, worst, float(tol))


def check_stationary_supersolution(w, field, f, tol):
    """Certify ``Lap w + f <= phi + tol`` at every node."""
    r, phi = _drive(w, field, f)
    return _certificate(r - phi, tol)


def check_stationary_subsolution(w, field, f, tol):
    """Certify ``Lap w + f >= -phi - tol`` at every node."""
    r, phi = _drive(w, field, f)
    return _certificate(-r - phi, tol)


def mean_force_bound(w, field, f, tol):
    """Check ``|f| <= mean(phi along w) + tol`` for a constant force ``f``.

    Holds for any profile passing both certificates because the discrete
    Laplacian has zero mean on the torus.
    """
    phi = node_phi(field, w.grid, w.u)
    mean_phi = float(np.mean(phi))
    return {"ok": abs(float(f)) <= mean_phi + tol, "mean_phi": mean_phi, "force": float(f), "tol": float(tol)}


def verify_order(run_u, run_v):
    """Largest ``max_i(u_i - v_i)`` over all recorded states of two runs.

    Both runs must have been made with ``record_states=True`` on the same
    grid with the same recording times.
    """
    if run_u.state.grid != run_v.state.grid:
        raise ContractError("runs use different grids")
    if run_u.snapshots is None or run_v.snapshots is None:
        raise ContractError("verify_order needs runs recorded with record_states=True")
    n = min(run_u.snapshots.shape[0], run_v.snapshots.shape[0])
    if n == 0 or not np.array_equal(run_u.times[:n], run_v.times[:n]):
        raise ContractError("runs were recorded at different times")
    worst = float(np.max(run_u.snapshots[:n] - run_v.snapshots[:n]))
    if run_u.state.t == run_v.state.t:
        worst = max(worst, float(np.max(run_u.state.u - run_v.state.u)))
    return worst
