"""Interfaces with localized dry friction in random obstacle fields.

Simulates ``u_t - Lap u + phi(x, u) d|u_t| ∋ f`` on the flat torus, where
``phi`` is a smoothed union of balls around Poisson-distributed centers, and
checks discrete analogues of its pinning and hysteresis properties.

Modules
-------
obstacle_field
    Sampling and evaluation of the obstacle strength ``phi``.
solver
    Grids, forcing, the explicit time loop and its scalar solves.
analysis
    Energies, the dissipation balance and stationary certificates.
experiments
    Threshold bisection, hysteresis loops, regularization study, ensembles.
config, cli
    Run configuration and the ``dryfriction`` command.
"""
from .errors import ConfigurationError, ContractError, NumericalFailure
from .obstacle_field import ObstacleField, ObstacleSpec, sample_field
from .solver import ForcingSpec, SolverConfig, State, TorusGrid, run_until

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ContractError",
    "NumericalFailure",
    "ObstacleField",
    "ObstacleSpec",
    "sample_field",
    "ForcingSpec",
    "SolverConfig",
    "State",
    "TorusGrid",
    "run_until",
]
