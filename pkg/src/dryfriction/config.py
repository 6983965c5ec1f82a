"""Line-based ``key = value`` run configuration.

Keys are dotted ``section.name``. Blank lines and lines starting with ``#``
are ignored. Lists are comma separated; ``none`` leaves an optional value
unset. :func:`dump` writes every key (defaults included) in a fixed order, so
``parse_config(dump(cfg)) == cfg``.
"""
from dataclasses import dataclass

from . import rng, serialize
from .errors import ConfigurationError
from .obstacle_field import ObstacleSpec
from .solver import ForcingSpec, SolverConfig, TorusGrid

REQUIRED = object()

# key -> (type, default); type is one of float, int, str, "floats", "ints"
SCHEMA = {
    "obstacle.lambda": (float, REQUIRED),
    "obstacle.rho": (float, REQUIRED),
    "obstacle.delta": (float, REQUIRED),
    "obstacle.Y": (float, REQUIRED),
    "obstacle.n": (int, REQUIRED),
    "obstacle.seed": (int, None),
    "grid.m": (int, REQUIRED),
    "solver.backend": (str, "prox"),
    "solver.epsilon": (float, None),
    "solver.cfl_factor": (float, 0.9),
    "solver.tol_pin": (float, 1e-8),
    "solver.dwell_window": (float, None),
    "solver.escape_margin": (float, None),
    "solver.t_max": (float, 50.0),
    "solver.output_stride": (int, 1000),
    "forcing.kind": (str, "constant"),
    "forcing.value": (float, 0.0),
    "forcing.amplitude": (float, None),
    "forcing.period": (float, None),
    "forcing.times": ("floats", None),
    "forcing.values": ("floats", None),
    "pinning.F_init_hi": (float, 1.0),
    "pinning.steps": (int, 10),
    "pinning.max_doublings": (int, 4),
    "hysteresis.F_lo": (float, None),
    "hysteresis.amplitude_fraction": (float, 0.8),
    "hysteresis.period": (float, None),
    "hysteresis.period_factor": (float, 42.0),
    "hysteresis.cycles": (int, 8),
    "hysteresis.samples_per_quarter": (int, 100),
    "eps.force": (float, 0.3),
    "eps.values": ("floats", (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)),
    "eps.T": (float, 1.0),
    "eps.samples": (int, 50),
    "ensemble.count": (int, 8),
    "ensemble.seeds": ("ints", None),
    "run.seed": (int, 0),
    "run.svg": (str, "yes"),
}


def _convert(key, kind, text, lineno):
    if text.lower() == "none":
        return None
    try:
        if kind is float:
            return float(text)
        if kind is int:
            return int(text)
        if kind == "floats":
            return tuple(float(p) for p in text.split(",") if p.strip())
        if kind == "ints":
            return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigurationError(f"line {lineno}: {key} has invalid value {text!r}") from None
    return text


def _format(kind, value):
    if value is None:
        return "none"
    if kind is float:
        return serialize.fmt(value)
    if kind == "floats":
        return ", ".join(serialize.fmt(v) for v in value)
    if kind == "ints":
        return ", ".join(str(int(v)) for v in value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``values`` maps every schema key to its value."""

    values: tuple

    def __getitem__(self, key):
        return dict(self.values)[key]

    def get(self, key):
        return dict(self.values)[key]

    def with_seed(self, seed):
        v = dict(self.values)
        v["run.seed"] = int(seed)
        return _build(v)

    @property
    def seed(self):
        return self["run.seed"]

    @property
    def field_seed(self):
        s = self["obstacle.seed"]
        return self.seed if s is None else s

    @property
    def obstacle(self):
        return ObstacleSpec(
            intensity=self["obstacle.lambda"],
            radius=self["obstacle.rho"],
            mollification_width=self["obstacle.delta"],
            slab_half_height=self["obstacle.Y"],
            dimension=self["obstacle.n"],
            seed=self.field_seed,
        )

    @property
    def grid(self):
        return TorusGrid(self["obstacle.n"], self["grid.m"])

    @property
    def solver(self):
        return SolverConfig(
            backend=self["solver.backend"],
            epsilon=self["solver.epsilon"],
            cfl_factor=self["solver.cfl_factor"],
            tol_pin=self["solver.tol_pin"],
            dwell_window=self["solver.dwell_window"],
            escape_margin=self["solver.escape_margin"],
            t_max=self["solver.t_max"],
            output_stride=self["solver.output_stride"],
        )

    @property
    def forcing(self):
        kind = self["forcing.kind"]
        if kind == "constant":
            return ForcingSpec.constant(self["forcing.value"])
        if kind == "cycle":
            if self["forcing.amplitude"] is None or self["forcing.period"] is None:
                raise ConfigurationError("cycle forcing needs forcing.amplitude and forcing.period")
            return ForcingSpec.cycle(self["forcing.amplitude"], self["forcing.period"])
        if kind == "tabulated":
            if self["forcing.times"] is None or self["forcing.values"] is None:
                raise ConfigurationError("tabulated forcing needs forcing.times and forcing.values")
            return ForcingSpec.tabulated(self["forcing.times"], self["forcing.values"])
        raise ConfigurationError(f"unknown forcing.kind {kind!r}")

    def ensemble_seeds(self):
        seeds = self["ensemble.seeds"]
        if seeds is not None:
            return list(seeds)
        return rng.derive_seeds(self.seed, self["ensemble.count"])


def _build(values):
    cfg = RunConfig(tuple((k, values[k]) for k in SCHEMA))
    # constructing every component checks its invariants
    cfg.obstacle
    cfg.grid
    cfg.solver
    cfg.forcing
    if cfg["run.svg"] not in ("yes", "no"):
        raise ConfigurationError("run.svg must be yes or no")
    if cfg["pinning.steps"] < 6:
        raise ConfigurationError("pinning.steps must be at least 6")
    eps = cfg["eps.values"]
    if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigurationError("eps.values must be positive and strictly decreasing")
    if cfg["ensemble.count"] < 8 and cfg["ensemble.seeds"] is None:
        raise ConfigurationError("ensemble.count must be at least 8")
    return cfg


def parse_config(text):
    """Parse and validate configuration text into a :class:`RunConfig`."""
    given = {}
    unknown = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or "." not in key:
            raise ConfigurationError(f"line {lineno}: expected a dotted 'section.name' key")
        if key not in SCHEMA:
            unknown.append(key)
            continue
        if key in given:
            raise ConfigurationError(f"line {lineno}: duplicate key {key}")
        given[key] = _convert(key, SCHEMA[key][0], value, lineno)
    if unknown:
        raise ConfigurationError("unknown keys: " + ", ".join(unknown))
    missing = [k for k, (_, d) in SCHEMA.items() if d is REQUIRED and given.get(k) is None]
    if missing:
        raise ConfigurationError("missing required keys: " + ", ".join(missing))
    values = {k: given.get(k, d) for k, (_, d) in SCHEMA.items()}
    return _build(values)


def dump(cfg):
    """Normalized text form listing every key."""
    return "".join(f"{k} = {_format(SCHEMA[k][0], v)}\n" for k, v in cfg.values)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
