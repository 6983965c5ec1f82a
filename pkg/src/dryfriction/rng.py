"""Reproducible random streams.

All randomness goes through :func:`stream`, which builds a
``numpy.random.Generator`` on the PCG64 bit generator seeded by
``SeedSequence(seed, spawn_key=(stream_id,))``. Distinct stream ids give
statistically independent streams from one 64-bit seed.
"""
import numpy as np

FIELD_STREAM = 0
EXPERIMENT_STREAM = 1

GENERATOR_NAME = "numpy.random.PCG64 via SeedSequence(seed, spawn_key=(stream,))"


def stream(seed, stream_id):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream_id,))))


def derive_seeds(master_seed, count):
    """``count`` 63-bit seeds drawn from the experiment stream of ``master_seed``."""
    rng = stream(master_seed, EXPERIMENT_STREAM)
    return [int(s) for s in rng.integers(0, 2**63, size=count, dtype=np.uint64)]
