"""Seeded random streams.

All randomness goes through :func:`make_rng`, which always builds a
``numpy.random.Generator`` on the PCG64 bit generator. Independent streams are
derived by mixing a stream tag into the seed sequence, so for example the SPSA
perturbations never share a stream with data generation even when both use
the same user seed.
"""

from enum import IntEnum

import numpy as np

__all__ = ["Stream", "make_rng", "child_seeds"]


class Stream(IntEnum):
    DEFAULT = 0
    DATA = 1
    ANSATZ_INIT = 2
    SPSA_PERTURBATION = 3
    QPDE_SAMPLING = 4
    SHOTS = 5


def make_rng(
    seed: int | np.random.SeedSequence, stream: Stream = Stream.DEFAULT
) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    if seed < 0:
        raise ValueError(f"Seed must be non-negative: {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, int(stream)])))


def child_seeds(seed: int, count: int, stream: Stream = Stream.DEFAULT) -> list[int]:
    """Derive ``count`` integer seeds from ``seed``; stable across platforms."""
    seq = np.random.SeedSequence([seed, int(stream)])
    return [int(s.generate_state(1, dtype=np.uint32)[0]) for s in seq.spawn(count)]
