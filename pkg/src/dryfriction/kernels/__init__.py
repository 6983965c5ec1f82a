"""Hot numerical kernels.

Two interchangeable implementations live here: :mod:`.jit` (numba, scalar
loops compiled with ``@njit``) and :mod:`.vectorized` (pure numpy). The active
one is chosen once at import time; set ``DRYFRICTION_DISABLE_JIT=1`` to force
the numpy path. If numba cannot be imported the numpy path is used as well.

Both modules expose the same functions:

``phi_nodes(u, xs, centers, cell_start, gi, gf, out)``
    obstacle strength at every node ``(xs[i], u[i])``.
``nearest_distance(point, centers, cell_start, gi, gf)``
    periodic distance to the nearest center, ``inf`` beyond the reach.
``run(...)``
    the explicit time-stepping loop, see :func:`dryfriction.solver.run_until`.
"""
import importlib
import os

from . import vectorized
from ._codes import *  # noqa: F401,F403

_DISABLED = os.environ.get("DRYFRICTION_DISABLE_JIT", "").strip().lower() in ("1", "true", "yes", "on")


def _load_jit():
    if _DISABLED:
        return None
    try:
        return importlib.import_module(".jit", __name__)
    except ImportError:  # pragma: no cover - numba missing
        return None


jit = _load_jit()

active = jit if jit is not None else vectorized
ACTIVE_NAME = "numba" if jit is not None else "numpy"

# geometry arrays passed to the kernels:
#   gi = [n, n_lat, n_v]                       (int64)
#   gf = [rho, delta, Y, edge_lat, edge_v]     (float64)

__all__ = ["active", "jit", "vectorized", "ACTIVE_NAME"]
