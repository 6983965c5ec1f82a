"""Explicit time stepping of  u_t - Lap u + phi(x, u) d|u_t|  ∋  f  on the torus.

Per node and step the scalar inclusion ``a + phi*s = g``, ``s ∈ d|a|``, with
``g = Lap_h u + f`` is solved exactly (soft thresholding) or through the
smooth surrogate ``a + phi*a/sqrt(a^2+eps^2) = g``. The update is

    u <- u + dt * a,   dt = cfl * h^2 / (2n),

with ``phi`` frozen at the pre-step height. For ``cfl <= 1`` the map is
monotone in every stencil input.
"""
from dataclasses import dataclass, field as dc_field, replace
import math

import numpy as np

from . import kernels, serialize
from .errors import ConfigurationError, ContractError, NumericalFailure
from .kernels import (
    BACKEND_PROX,
    BACKEND_REGULARIZED,
    ESCAPED,
    FORCE_CONSTANT,
    FORCE_CYCLE,
    FORCE_TABULATED,
    NONFINITE,
    STATIONARY,
    TIMEOUT,
)
from .kernels import vectorized as _vec

OUTCOMES = {STATIONARY: "stationary", ESCAPED: "escaped", TIMEOUT: "timeout"}
SUMMARY_HEADER = ("t", "mean_u", "min_u", "max_u", "max_excess", "energy")


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid with ``m`` points per axis on ``[0,1)^n``."""

    n: int
    m: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ConfigurationError("grid dimension must be 1 or 2")
        if self.m < 8:
            raise ConfigurationError("grid needs at least 8 points per axis")

    @property
    def h(self):
        return 1.0 / self.m

    @property
    def size(self):
        return self.m**self.n

    @property
    def cell_volume(self):
        return self.h**self.n

    def positions(self):
        """Node coordinates as an ``(m**n, 2)`` array (second column unused in 1D)."""
        ax = np.arange(self.m) * self.h
        xs = np.zeros((self.size, 2))
        if self.n == 1:
            xs[:, 0] = ax
        else:
            xs[:, 0] = np.repeat(ax, self.m)
            xs[:, 1] = np.tile(ax, self.m)
        return xs

    def max_dt(self):
        return self.h**2 / (2 * self.n)

    def dt(self, cfl_factor):
        return cfl_factor * self.max_dt()


@dataclass
class State:
    grid: TorusGrid
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.u = np.ascontiguousarray(self.u, dtype=float).reshape(-1)
        if self.u.shape[0] != self.grid.size:
            raise ContractError(f"state has {self.u.shape[0]} values, grid needs {self.grid.size}")
        if not np.all(np.isfinite(self.u)):
            raise ContractError("state contains non-finite heights")
        if self.t < 0:
            raise ContractError("time must be non-negative")

    @classmethod
    def zeros(cls, grid, t=0.0):
        return cls(grid, np.zeros(grid.size), t)

    def to_json(self):
        return serialize.dumps({"grid": {"n": self.grid.n, "m": self.grid.m}, "t": float(self.t), "u": self.u.tolist()})

    @classmethod
    def from_json(cls, text):
        d = serialize.loads(text)
        return cls(TorusGrid(int(d["grid"]["n"]), int(d["grid"]["m"])), np.array(d["u"], dtype=float), float(d["t"]))


@dataclass(frozen=True)
class ForcingSpec:
    """Driving force ``f(x, t) = scalar(t) + lateral[x]``.

    Use the :meth:`constant`, :meth:`cycle` and :meth:`tabulated`
    constructors. ``cycle`` is the triangle wave 0 -> A -> -A -> A ... of
    period ``P``.
    """

    kind: str
    params: tuple = ()
    times: tuple = ()
    values: tuple = ()
    lateral: tuple = None

    @classmethod
    def constant(cls, value, lateral=None):
        return cls("constant", (float(value),), lateral=_as_tuple(lateral))

    @classmethod
    def cycle(cls, amplitude, period, lateral=None):
        if not period > 0:
            raise ConfigurationError("cycle period must be positive")
        return cls("cycle", (float(amplitude), float(period)), lateral=_as_tuple(lateral))

    @classmethod
    def tabulated(cls, times, values, lateral=None):
        times = tuple(float(t) for t in times)
        values = tuple(float(v) for v in values)
        if len(times) < 1 or len(times) != len(values):
            raise ConfigurationError("tabulated forcing needs matching, non-empty times and values")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError("tabulated forcing times must be strictly increasing")
        return cls("tabulated", (), times, values, _as_tuple(lateral))

    @property
    def code(self):
        return {"constant": FORCE_CONSTANT, "cycle": FORCE_CYCLE, "tabulated": FORCE_TABULATED}[self.kind]

    def _kernel_params(self):
        p = np.zeros(2)
        p[: len(self.params)] = self.params
        times = np.array(self.times if self.times else (0.0,))
        values = np.array(self.values if self.values else (0.0,))
        return p, times, values

    def scalar(self, t):
        p, times, values = self._kernel_params()
        return _vec.forcing_value(self.code, p, times, values, float(t))

    def lateral_array(self, grid):
        if self.lateral is None:
            return np.zeros(grid.size)
        lat = np.asarray(self.lateral, dtype=float)
        if lat.shape != (grid.size,):
            raise ContractError("lateral forcing does not match the grid")
        return lat

    def at(self, grid, t):
        return self.scalar(t) + self.lateral_array(grid)

    def is_time_constant(self):
        return self.kind == "constant" or (self.kind == "tabulated" and len(set(self.values)) == 1)

    def sup_norm(self, t_max):
        lat = 0.0 if self.lateral is None else np.asarray(self.lateral, dtype=float)
        if self.kind == "constant":
            s = np.abs(self.params[0] + lat)
        elif self.kind == "cycle":
            s = np.maximum(np.abs(self.params[0] + lat), np.abs(-self.params[0] + lat))
        else:
            # piecewise linear: extremes at the nodes inside [0, t_max] and the ends
            ts = [t for t in self.times if t <= t_max] + [0.0, t_max]
            s = max(np.max(np.abs(self.scalar(t) + lat)) for t in ts)
        return float(np.max(s))

    def rate_bound(self):
        """Upper bound on ``|df/dt|`` (all kinds are piecewise linear in t)."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "cycle":
            return 4.0 * abs(self.params[0]) / self.params[1]
        if len(self.times) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.times))))

    def check_horizon(self, t_max):
        if self.kind == "tabulated" and (self.times[0] > 0.0 or self.times[-1] < t_max):
            raise ConfigurationError("tabulated forcing must cover [0, t_max]")


def _as_tuple(lateral):
    if lateral is None:
        return None
    return tuple(float(v) for v in np.asarray(lateral, dtype=float).reshape(-1))


@dataclass(frozen=True)
class SolverConfig:
    """Time stepping and stopping rules.

    ``dwell_window`` and ``escape_margin`` default to ``50*dt`` and ``2*h``.
    """

    backend: str = "prox"
    epsilon: float = None
    cfl_factor: float = 0.9
    tol_pin: float = 1e-8
    dwell_window: float = None
    escape_margin: float = None
    t_max: float = 50.0
    output_stride: int = 1000

    def __post_init__(self):
        if self.backend not in ("prox", "regularized"):
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        if self.backend == "regularized" and not (self.epsilon is not None and self.epsilon > 0):
            raise ConfigurationError("regularized backend needs epsilon > 0")
        if not (0 < self.cfl_factor <= 1):
            raise ConfigurationError("cfl_factor must lie in (0, 1]; larger steps violate the CFL bound")
        if not self.tol_pin > 0:
            raise ConfigurationError("tol_pin must be positive")
        if not self.t_max > 0:
            raise ConfigurationError("t_max must be positive")
        if int(self.output_stride) < 1:
            raise ConfigurationError("output_stride must be at least 1")

    def replace(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        return {
            "backend": self.backend,
            "epsilon": self.epsilon,
            "cfl_factor": self.cfl_factor,
            "tol_pin": self.tol_pin,
            "dwell_window": self.dwell_window,
            "escape_margin": self.escape_margin,
            "t_max": self.t_max,
            "output_stride": int(self.output_stride),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @property
    def backend_code(self):
        return BACKEND_PROX if self.backend == "prox" else BACKEND_REGULARIZED

    def dwell_steps(self, grid):
        dt = grid.dt(self.cfl_factor)
        window = 50 * dt if self.dwell_window is None else self.dwell_window
        return max(1, int(math.ceil(window / dt - 1e-9)))

    def margin(self, grid):
        return 2 * grid.h if self.escape_margin is None else self.escape_margin


class FrozenStrength:
    """Height-independent obstacle strength given per grid node."""

    def __init__(self, values):
        v = np.ascontiguousarray(values, dtype=float).reshape(-1)
        if np.any(v < 0):
            raise ContractError("obstacle strength must be non-negative")
        self.values = v

    def node_phi(self, grid, u):
        if self.values.shape[0] != grid.size:
            raise ContractError("frozen strength does not match the grid")
        return self.values.copy()


def node_phi(field, grid, u):
    """Obstacle strength at every node ``(x_i, u_i)``."""
    if isinstance(field, FrozenStrength):
        return field.node_phi(grid, u)
    out = np.empty(grid.size)
    kernels.active.phi_nodes(np.ascontiguousarray(u, dtype=float), grid.positions(), *field.kernel_args, out)
    return out


def escape_height(field, grid, config):
    """Height the whole interface must clear to count as depinned."""
    if isinstance(field, FrozenStrength):
        return math.inf
    spec = field.spec
    return spec.slab_half_height + spec.reach + config.margin(grid)


# scalar and field operators ------------------------------------------------


def laplacian(grid, u):
    """Periodic second-order central difference ``(sum_nb u - 2n u_i) / h^2``."""
    u = np.ascontiguousarray(u, dtype=float)
    return _vec.laplacian(u, grid.m, grid.n, grid.h**2, np.empty(grid.size))


def friction_velocity(g, phi):
    """Unique ``a`` with ``a + phi*s = g`` for some ``s ∈ d|a|``."""
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < 0):
        raise ContractError("obstacle strength must be non-negative")
    out = _vec.soft_threshold(g, phi)
    return float(out) if out.ndim == 0 else out


def regularized_velocity(g, phi, eps):
    """Root of ``a + phi * a / sqrt(a^2 + eps^2) = g`` to absolute tolerance 1e-12."""
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < 0):
        raise ContractError("obstacle strength must be non-negative")
    if not eps > 0:
        raise ContractError("eps must be positive")
    g = np.asarray(g, dtype=float)
    shape = np.broadcast(g, phi).shape
    try:
        out = _vec.regularized_velocity(np.broadcast_to(g, shape).reshape(-1), np.broadcast_to(phi, shape).reshape(-1),
                                        float(eps))
    except RuntimeError as exc:
        raise NumericalFailure(str(exc)) from exc
    return float(out[0]) if shape == () else np.asarray(out).reshape(shape)


def velocities(state, field, forcing, config):
    """Driving value ``g``, strength ``phi`` and velocity ``a`` at every node."""
    grid = state.grid
    g = laplacian(grid, state.u) + (forcing.scalar(state.t) + forcing.lateral_array(grid))
    phi = node_phi(field, grid, state.u)
    if config.backend == "prox":
        a = _vec.soft_threshold(g, phi)
    else:
        a = regularized_velocity(g, phi, config.epsilon)
    return g, phi, a


def step(state, field, forcing, config):
    """One explicit step; ``phi`` uses the pre-step heights."""
    _, _, a = velocities(state, field, forcing, config)
    dt = state.grid.dt(config.cfl_factor)
    return State(state.grid, state.u + dt * a, state.t + dt)


def residual(state, field, forcing):
    """Stationarity residual ``r = Lap u + f`` and its excess over ``phi``."""
    grid = state.grid
    r = laplacian(grid, state.u) + (forcing.scalar(state.t) + forcing.lateral_array(grid))
    phi = node_phi(field, grid, state.u)
    return {"r": r, "excess": np.maximum(np.abs(r) - phi, 0.0), "phi": phi}


def _finite(x):
    return float(min(max(x, -1e300), 1e300))


# time loop --------------------------------------------------------------------


@dataclass
class RunResult:
    state: State
    outcome: str
    steps: int
    rows: np.ndarray
    snapshots: np.ndarray = None
    meta: dict = dc_field(default_factory=dict)

    @property
    def times(self):
        return self.rows[:, 0]

    def summary_csv(self):
        return serialize.csv_text(SUMMARY_HEADER, self.rows)


def run_until(state, field, forcing, config, *, stop_when_stationary=True, check_escape=True,
              certain_escape=False, record_states=False, output_stride=None, impl=None):
    """Step until stationary, escaped, or ``t >= t_max``.

    Parameters
    ----------
    state : State
        Initial state; not modified.
    field : ObstacleField or FrozenStrength
    forcing : ForcingSpec
    config : SolverConfig
    stop_when_stationary : bool
        Disable for time-dependent loading.
    check_escape : bool
        Stop once ``min u >= H`` or ``max u <= -H`` with
        ``H = Y + rho + delta + margin``.
    certain_escape : bool
        Under a constant force that is strictly positive (negative) at every
        node, also count the run as escaped once the whole interface lies
        ``margin`` above (below) the support of every obstacle. From there
        ``phi`` stays zero and the discrete minimum principle makes the exit
        from the slab certain.
    record_states : bool
        Keep a copy of ``u`` at every recorded row.
    output_stride : int, optional
        Record every this many steps (default ``config.output_stride``).
        The final state is always recorded.
    impl : module, optional
        Kernel implementation; defaults to :data:`dryfriction.kernels.active`.

    Returns
    -------
    RunResult
        ``rows`` holds ``t, mean_u, min_u, max_u, max_excess, energy``.
    """
    impl = kernels.active if impl is None else impl
    grid = state.grid
    forcing.check_horizon(config.t_max)
    dt = grid.dt(config.cfl_factor)
    max_steps = max(0, int(math.ceil((config.t_max - state.t) / dt - 1e-9)))
    stride = int(output_stride or config.output_stride)
    fparams, ftimes, fvalues = forcing._kernel_params()

    if isinstance(field, FrozenStrength):
        frozen = field.node_phi(grid, state.u)
        z = np.zeros(grid.size + 1, dtype=np.int64)
        table = (z, np.zeros(0), np.zeros(0), z, np.zeros(0), np.zeros(0, dtype=np.int8),
                 np.zeros(1, dtype=np.int64), np.zeros(0), np.zeros(0))
        rho, delta = 0.0, 1.0
        use_frozen = True
    else:
        if field.spec.dimension != grid.n:
            raise ContractError("field and grid dimensions differ")
        frozen = np.zeros(0)
        table = field.node_table(grid.positions())
        rho, delta = field.spec.radius, field.spec.mollification_width
        use_frozen = False
    H = escape_height(field, grid, config)
    up, down = H, -H
    if certain_escape and forcing.kind == "constant" and not isinstance(field, FrozenStrength):
        f_nodes = forcing.at(grid, 0.0)
        heights = field.centers[:, grid.n]
        margin = config.margin(grid)
        if f_nodes.min() > 0:
            top = heights.max() + field.spec.reach if heights.size else -math.inf
            up = min(H, top + margin)
        elif f_nodes.max() < 0:
            bottom = heights.min() - field.spec.reach if heights.size else math.inf
            down = max(-H, bottom - margin)
    eps = float(config.epsilon) if config.backend == "regularized" else 1.0

    try:
        u, k, code, rows, n_rows, snaps = impl.run(
            state.u, float(state.t), float(dt), int(max_steps), int(grid.m), int(grid.n),
            float(grid.h**2), float(grid.cell_volume),
            table, float(rho), float(delta), frozen, bool(use_frozen),
            int(forcing.code), fparams, ftimes, fvalues, forcing.lateral_array(grid),
            float(forcing.rate_bound()),
            int(config.backend_code), eps, float(config.tol_pin), int(config.dwell_steps(grid)),
            bool(stop_when_stationary), _finite(up), _finite(down),
            bool(check_escape and math.isfinite(H)), stride, bool(record_states),
        )
    except RuntimeError as exc:
        raise NumericalFailure(str(exc)) from exc
    if code == NONFINITE:
        raise NumericalFailure(f"non-finite height encountered at step {k}", step=int(k))
    final = State(grid, np.array(u), state.t + k * dt)
    return RunResult(
        state=final,
        outcome=OUTCOMES[int(code)],
        steps=int(k),
        rows=np.array(rows[:n_rows]),
        snapshots=np.array(snaps[:n_rows]) if record_states else None,
        meta={"dt": dt, "escape_height": H, "max_steps": max_steps, "backend": config.backend},
    )
