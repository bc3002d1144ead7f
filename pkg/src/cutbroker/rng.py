"""Named, forkable random streams.

Every random decision in a job is drawn from a stream addressed by the
master seed plus a path of names (stage, evaluation index, variant key...).
Two runs with the same master seed therefore consume identical randomness
regardless of scheduling order.
"""

import hashlib

import numpy as np


def _word(part):
    if isinstance(part, (int, np.integer)) and part >= 0:
        return int(part)
    digest = hashlib.blake2b(str(part).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def seed_sequence(master_seed, *path):
    return np.random.SeedSequence([int(master_seed), *(_word(p) for p in path)])


def stream(master_seed, *path):
    """Return a ``numpy.random.Generator`` for ``path`` under ``master_seed``."""
    return np.random.default_rng(seed_sequence(master_seed, *path))


def derive_seed(master_seed, *path):
    """A 63-bit integer seed for ``path``; used for seeds that cross a wire."""
    state = seed_sequence(master_seed, *path).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & ((1 << 63) - 1)


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
