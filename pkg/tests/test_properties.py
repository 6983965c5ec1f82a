"""Property-based checks of the invariants of the scheme."""
import math

import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dryfriction import config as cfgmod, serialize
from dryfriction.analysis import dissipation_residual, energy
from dryfriction.obstacle_field import ObstacleSpec, sample_field
from dryfriction.solver import (
    ForcingSpec,
    FrozenStrength,
    SolverConfig,
    State,
    TorusGrid,
    friction_velocity,
    regularized_velocity,
    run_until,
    step,
    velocities,
)

finite = st.floats(-50, 50, allow_nan=False)
strength = st.floats(0, 5, allow_nan=False)
SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
M = 16
GRID = TorusGrid(1, M)
heights = arrays(float, M, elements=st.floats(-1, 1, allow_nan=False))
phis = arrays(float, M, elements=st.floats(0, 1, allow_nan=False))


@given(finite, strength)
def test_prox_solves_inclusion(g, phi):
    a = friction_velocity(g, phi)
    if a == 0:
        assert abs(g) <= phi
    else:
        assert math.isclose(g - a, phi * math.copysign(1, a), rel_tol=1e-12, abs_tol=1e-12)


@given(finite, finite, strength)
def test_prox_is_monotone_odd_and_contracting(g1, g2, phi):
    a1, a2 = friction_velocity(g1, phi), friction_velocity(g2, phi)
    if g1 <= g2:
        assert a1 <= a2
    assert friction_velocity(-g1, phi) == -a1
    assert abs(a1 - a2) <= abs(g1 - g2) + 1e-12


@given(finite, strength, st.floats(1e-6, 1.0))
def test_regularized_bound_against_prox(g, phi, eps):
    a = regularized_velocity(g, phi, eps)
    p = friction_velocity(g, phi)
    bound = min(phi, (phi * eps * eps / 2) ** (1 / 3))
    assert abs(a - p) <= bound + 1e-10
    assert abs(a + phi * a / math.sqrt(a * a + eps * eps) - g) <= 1e-9 * (1 + abs(g))


@given(heights, heights, phis, st.floats(-1, 1), st.floats(0, 1), st.floats(0.05, 1.0))
@SETTINGS
def test_step_preserves_order(u, w, phi, F, dF, cfl):
    lo, hi = np.minimum(u, w), np.maximum(u, w)
    field = FrozenStrength(phi)
    cfg = SolverConfig(cfl_factor=cfl)
    a = step(State(GRID, lo), field, ForcingSpec.constant(F), cfg)
    b = step(State(GRID, hi), field, ForcingSpec.constant(F + dF), cfg)
    assert np.all(a.u <= b.u + 1e-12)


@given(heights, phis, st.floats(-1, 1), st.floats(0.1, 1.0))
@SETTINGS
def test_energy_identity_and_decrease(u, phi, F, cfl):
    field = FrozenStrength(phi)
    cfg = SolverConfig(cfl_factor=cfl)
    f = ForcingSpec.constant(F)
    pre = State(GRID, u)
    _, ph, a = velocities(pre, field, f, cfg)
    dt = GRID.dt(cfl)
    post = State(GRID, pre.u + dt * a, dt)
    h = GRID.h
    d = (np.roll(a, -1) - a) / h
    curvature = 0.5 * dt * dt * h * float(np.sum(d * d))
    scale = 1 + float(np.sum(np.abs(u))) + float(np.sum(a * a)) / GRID.m
    assert abs(dissipation_residual(pre, post, a, ph, f) - curvature) <= 1e-9 * scale
    # curvature term never exceeds the viscous dissipation when cfl <= 1
    assert energy(post, f).total <= energy(pre, f).total + 1e-9 * scale


@given(st.floats(-1.5, 1.5), st.integers(0, 2**32), st.integers(1, 40))
@settings(max_examples=15, deadline=None)
def test_growth_bound(F, seed, steps):
    field = sample_field(ObstacleSpec(50.0, 0.1, 0.04, 1.0, 1, seed))
    g = TorusGrid(1, 32)
    cfg = SolverConfig(t_max=steps * g.dt(0.9) * 50)
    r = run_until(State.zeros(g), field, ForcingSpec.constant(F), cfg, stop_when_stationary=False,
                  check_escape=False, output_stride=25)
    bound = r.rows[:, 0] * (abs(F) + 1.0)
    assert np.all(np.maximum(np.abs(r.rows[:, 2]), np.abs(r.rows[:, 3])) <= bound + 1e-9)


@given(st.integers(0, 2**63), arrays(float, (20, 2), elements=st.floats(-1.3, 1.3, allow_nan=False)))
@settings(max_examples=25, deadline=None)
def test_phi_range_and_lateral_periodicity(seed, pts):
    field = sample_field(ObstacleSpec(50.0, 0.1, 0.04, 1.0, 1, seed))
    pts[:, 0] = np.round(pts[:, 0] * 2**30) / 2**30
    v = field.phi(pts)
    assert np.all((v >= 0) & (v <= 1))
    shifted = pts.copy()
    shifted[:, 0] += 1.0
    assert np.array_equal(v, field.phi(shifted))


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_formatting_roundtrips(x):
    assert float(serialize.fmt(x)) == x
    assert serialize.loads(serialize.dumps({"x": x}))["x"] == x


@given(st.integers(0, 2**40), st.sampled_from(["prox", "regularized"]), st.floats(0.1, 1.0),
       st.integers(16, 512))
@settings(max_examples=30, deadline=None)
def test_config_dump_roundtrip(seed, backend, cfl, m):
    text = (f"obstacle.lambda = 50\nobstacle.rho = 0.1\nobstacle.delta = 0.04\nobstacle.Y = 1\nobstacle.n = 1\n"
            f"grid.m = {m}\nrun.seed = {seed}\nsolver.backend = {backend}\nsolver.cfl_factor = {cfl!r}\n"
            + ("solver.epsilon = 0.001\n" if backend == "regularized" else ""))
    cfg = cfgmod.parse_config(text)
    assert cfgmod.parse_config(cfgmod.dump(cfg)) == cfg
