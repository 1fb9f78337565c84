"""Named, seedable, splittable random streams.

Every random draw in forgetmari comes from a PCG64 generator derived from a
base seed and a stream name. Streams with different names are statistically
independent, and the same (seed, name) pair yields the same numbers on every
platform.
"""

import zlib

import numpy as np


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, *names: str) -> np.random.Generator:
    """Generator for the stream ``names`` under ``seed``.

    Example:
        shuffle_rng = stream(7, "finetune", "shuffle")
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_name_key(n) for n in names))
    return np.random.Generator(np.random.PCG64(seq))
