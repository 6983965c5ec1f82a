import math

import numpy as np
import pytest

from oracles import bisect_regularized, dense_laplacian, scan_inclusion
from dryfriction.errors import ConfigurationError, ContractError
from dryfriction.solver import (
    ForcingSpec,
    FrozenStrength,
    SolverConfig,
    State,
    TorusGrid,
    escape_height,
    friction_velocity,
    laplacian,
    node_phi,
    regularized_velocity,
    residual,
    run_until,
    step,
)


# grid and Laplacian -----------------------------------------------------------


def test_grid_rejects_bad_sizes():
    with pytest.raises(ConfigurationError):
        TorusGrid(3, 16)
    with pytest.raises(ConfigurationError):
        TorusGrid(1, 4)


def test_laplacian_of_constant_is_zero():
    g = TorusGrid(1, 32)
    assert np.all(laplacian(g, np.full(32, 3.7)) == 0.0)


def test_laplacian_cosine_eigenvector():
    g = TorusGrid(1, 64)
    x = np.arange(64) * g.h
    u = np.cos(2 * np.pi * x)
    lam = -(2 / g.h**2) * (1 - np.cos(2 * np.pi * g.h))
    assert np.max(np.abs(laplacian(g, u) - lam * u)) <= 1e-9
    assert np.max(np.abs(dense_laplacian(g) @ u - lam * u)) <= 1e-9


@pytest.mark.parametrize("n", [1, 2])
def test_laplacian_matches_dense_matrix(n, rng):
    g = TorusGrid(n, 16)
    u = rng.normal(size=g.size)
    want = dense_laplacian(g) @ u
    got = laplacian(g, u)
    assert np.max(np.abs(got - want)) <= 1e-12 * np.max(np.abs(want))


# scalar solves ------------------------------------------------------------------


@pytest.mark.parametrize("g, phi, want", [(2.0, 1.0, 1.0), (0.5, 1.0, 0.0), (-2.5, 1.0, -1.5)])
def test_friction_velocity_examples(g, phi, want):
    assert friction_velocity(g, phi) == want
    assert abs(scan_inclusion([g], [phi])[0] - want) <= 1e-6


def test_friction_velocity_without_friction(rng):
    g = rng.normal(size=50)
    assert np.array_equal(friction_velocity(g, np.zeros(50)), g)


def test_friction_velocity_rejects_negative_phi():
    with pytest.raises(ContractError):
        friction_velocity(1.0, -0.1)


def test_regularized_examples():
    assert regularized_velocity(1.3, 0.0, 0.1) == pytest.approx(1.3, abs=1e-12)
    assert regularized_velocity(0.0, 0.7, 0.1) == 0.0
    a = regularized_velocity(2.0, 1.0, 1e-3)
    assert 0.999 < a < 1.001
    assert abs(a - bisect_regularized(2.0, 1.0, 1e-3)) <= 1e-10


def test_regularized_matches_bisection(rng):
    g = rng.uniform(-3, 3, 200)
    phi = rng.uniform(0, 1.5, 200)
    for eps in (1e-1, 1e-3, 1e-6):
        got = regularized_velocity(g, phi, eps)
        want = np.array([bisect_regularized(a, b, eps) for a, b in zip(g, phi)])
        assert np.max(np.abs(got - want)) <= 1e-10


def test_regularized_rejects_bad_eps():
    with pytest.raises(ContractError):
        regularized_velocity(1.0, 0.5, 0.0)


# stepping -----------------------------------------------------------------------


def test_free_constant_state_is_fixed(empty):
    g = TorusGrid(1, 32)
    s = State(g, np.full(32, 0.25))
    out = step(s, empty, ForcingSpec.constant(0.0), SolverConfig())
    assert np.array_equal(out.u, s.u)


def test_free_translation_is_exact(empty):
    g = TorusGrid(1, 32)
    cfg = SolverConfig()
    F = 0.5
    s = State.zeros(g)
    for _ in range(7):
        s = step(s, empty, ForcingSpec.constant(F), cfg)
    dt = g.dt(cfg.cfl_factor)
    u = 0.0
    for _ in range(7):
        u = u + dt * F
    assert np.all(s.u == u)


def test_pinned_profile_is_fixed_by_step(default_field, grid256, prox):
    f = ForcingSpec.constant(0.4)
    r = run_until(State.zeros(grid256), default_field, f, prox)
    assert r.outcome == "stationary"
    res = residual(r.state, default_field, f)
    if np.max(res["excess"]) <= 0.0:
        assert np.array_equal(step(r.state, default_field, f, prox).u, r.state.u)
    # pinned nodes (excess exactly zero) never move
    nxt = step(r.state, default_field, f, prox)
    still = res["excess"] == 0.0
    assert np.array_equal(nxt.u[still], r.state.u[still])


def test_residual_trivial_cases(default_field, empty):
    g = TorusGrid(1, 32)
    res = residual(State.zeros(g), empty, ForcingSpec.constant(0.0))
    assert np.all(res["r"] == 0) and np.all(res["excess"] == 0)
    phi = FrozenStrength(np.full(32, 0.6))
    res = residual(State.zeros(g), phi, ForcingSpec.constant(0.5))
    assert np.all(res["excess"] == 0)


def test_residual_excess_is_friction_velocity(default_field, grid256, rng):
    s = State(grid256, 0.2 * rng.normal(size=256))
    res = residual(s, default_field, ForcingSpec.constant(0.3))
    assert np.array_equal(res["excess"], np.abs(friction_velocity(res["r"], res["phi"])))


def test_state_validation():
    g = TorusGrid(1, 16)
    with pytest.raises(ContractError):
        State(g, np.zeros(15))
    with pytest.raises(ContractError):
        State(g, np.full(16, np.nan))


def test_state_json_roundtrip(rng):
    g = TorusGrid(2, 8)
    s = State(g, rng.normal(size=64), 0.125)
    back = State.from_json(s.to_json())
    assert back.grid == g and back.t == s.t and np.array_equal(back.u, s.u)


@pytest.mark.parametrize("kw", [dict(cfl_factor=1.5), dict(backend="regularized"), dict(backend="other"),
                                dict(tol_pin=0.0), dict(t_max=-1.0)])
def test_solver_config_validation(kw):
    with pytest.raises(ConfigurationError):
        SolverConfig(**kw)


def test_solver_config_roundtrip():
    c = SolverConfig(backend="regularized", epsilon=1e-3, t_max=3.0)
    assert SolverConfig.from_dict(c.to_dict()) == c


def test_forcing_cycle_shape():
    f = ForcingSpec.cycle(2.0, 8.0)
    assert [f.scalar(t) for t in (0, 1, 2, 4, 6, 8, 10)] == [0.0, 1.0, 2.0, 0.0, -2.0, 0.0, 2.0]
    assert f.rate_bound() == 1.0


def test_tabulated_forcing_interpolates_and_checks_horizon():
    f = ForcingSpec.tabulated([0.0, 1.0, 3.0], [0.0, 2.0, 0.0])
    assert f.scalar(0.5) == 1.0 and f.scalar(2.0) == 1.0
    with pytest.raises(ConfigurationError):
        f.check_horizon(5.0)
    with pytest.raises(ConfigurationError):
        ForcingSpec.tabulated([0.0, 0.0], [1.0, 2.0])


# run_until ----------------------------------------------------------------------


def test_zero_force_stationary_at_first_dwell(default_field, grid256, prox):
    r = run_until(State.zeros(grid256), default_field, ForcingSpec.constant(0.0), prox)
    assert r.outcome == "stationary"
    # the dwell counts consecutive quiet states, u0 included
    assert r.steps == prox.dwell_steps(grid256) - 1
    assert np.all(r.state.u == 0)


def test_free_interface_escapes_ballistically(empty, grid256):
    cfg = SolverConfig(t_max=20.0)
    F = 0.5
    r = run_until(State.zeros(grid256), empty, ForcingSpec.constant(F), cfg)
    H = escape_height(empty, grid256, cfg)
    assert r.outcome == "escaped"
    assert abs(r.state.t - H / F) <= grid256.dt(cfg.cfl_factor) + 1e-12


def test_force_above_sup_phi_escapes(default_field, grid256):
    r = run_until(State.zeros(grid256), default_field, ForcingSpec.constant(1.05), SolverConfig(t_max=20.0))
    assert r.outcome == "escaped"


def test_certain_escape_agrees_with_full_escape(default_field, grid256):
    cfg = SolverConfig(t_max=20.0)
    f = ForcingSpec.constant(1.05)
    a = run_until(State.zeros(grid256), default_field, f, cfg)
    b = run_until(State.zeros(grid256), default_field, f, cfg, certain_escape=True)
    assert a.outcome == b.outcome == "escaped"
    assert b.steps <= a.steps


def test_negative_force_escapes_downward(empty, grid256):
    r = run_until(State.zeros(grid256), empty, ForcingSpec.constant(-0.7), SolverConfig(t_max=20.0))
    assert r.outcome == "escaped" and r.state.u.max() < 0


def test_timeout_outcome(default_field, grid256):
    r = run_until(State.zeros(grid256), default_field, ForcingSpec.constant(0.99), SolverConfig(t_max=0.01))
    assert r.outcome == "timeout"
    assert r.state.t == pytest.approx(0.01, abs=grid256.dt(0.9))


def test_stationary_rows_have_small_excess(default_field, grid256, prox):
    r = run_until(State.zeros(grid256), default_field, ForcingSpec.constant(0.5), prox, output_stride=1)
    assert r.outcome == "stationary"
    assert np.all(r.rows[-prox.dwell_steps(grid256):, 4] <= prox.tol_pin)


def test_node_phi_matches_field(default_field, grid256, rng):
    u = rng.uniform(-1, 1, 256)
    pts = np.column_stack([grid256.positions()[:, 0], u])
    assert np.array_equal(node_phi(default_field, grid256, u), default_field.phi(pts))


def test_grid_field_dimension_mismatch(default_field):
    with pytest.raises(ContractError):
        run_until(State.zeros(TorusGrid(2, 8)), default_field, ForcingSpec.constant(0.0), SolverConfig())
