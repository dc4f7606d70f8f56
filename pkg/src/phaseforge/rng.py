"""Seeded random streams.

Every stochastic routine takes an explicit ``numpy.random.Generator``.
:func:`make_rng` builds counter-based (Philox) generators, optionally
split into named sub-streams so that e.g. the HIO and LPHIO runs of a
paired comparison see the same initial phases.
"""

from __future__ import annotations

import zlib

import numpy as np


def make_rng(seed: int, stream: str | None = None, *extra: int) -> np.random.Generator:
    key = ()
    if stream is not None:
        key = (zlib.crc32(stream.encode("utf-8")),) + tuple(int(e) for e in extra)
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
