"""Named random streams derived from a master seed.

A stream is keyed by ``(seed, *keys)``; string keys are hashed with CRC32 so
the derivation is stable across processes and Python versions (unlike
``hash``). Examples of keys used by the package::

    (seed, "data", generator)         training/validation points
    (seed, "target")                  the random target network
    (seed, "init")                    initial network weights
    (seed, optimizer, "shuffle", e)   epoch-e permutation
    (seed, optimizer, "sample", m)    resampling uniforms of global batch m
"""

import zlib

import numpy as np


def _key(k):
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    return int(k)


def stream(seed, *keys):
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + [_key(k) for k in keys]))
