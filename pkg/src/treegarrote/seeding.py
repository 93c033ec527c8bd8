"""Named random sub-streams derived from one integer seed."""

import numpy as np

STREAMS = {"forest": 1, "split": 2, "cv": 3, "datagen": 4, "probe": 5}


def seed_sequence(seed: int, stream: str, *extra: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), STREAMS[stream], *map(int, extra)])


def rng_for(seed: int, stream: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, stream, *extra))


def int_seed(seed: int, stream: str, *extra: int) -> int:
    """A 31-bit integer seed, for kernels that take a plain int."""
    return int(seed_sequence(seed, stream, *extra).generate_state(1)[0] & 0x7FFFFFFF)
