"""Deterministic, named random substreams.

All randomness in the package flows through `substream`: a counter-based
Philox generator keyed by (master_seed, path). Streams for different paths
are statistically independent, and the stream for a given path does not
depend on how many other streams exist or in what order they are created.
That is what makes results identical across worker counts and scheduling.
"""

from __future__ import annotations

import zlib

import numpy as np


def _path_key(part: int | str) -> int:
    # crc32 is stable across platforms and Python versions, unlike hash().
    if isinstance(part, bool):  # bool is an int subclass; reject to avoid surprises
        raise TypeError("substream path parts must be int or str, not bool")
    if isinstance(part, int):
        part = f"i[{part}]"
    elif isinstance(part, str):
        part = f"s[{part}]"
    else:
        raise TypeError(f"substream path parts must be int or str, got {type(part).__name__}")
    return zlib.crc32(part.encode("utf-8"))


def substream(master_seed: int, *path: int | str) -> np.random.Generator:
    """Return a fresh Philox generator for the named substream.

    Same (master_seed, path) -> bit-identical stream, every time, on every
    platform, regardless of what other substreams were created before.
    """
    if isinstance(master_seed, bool) or not isinstance(master_seed, int):
        raise TypeError(f"master_seed must be an int, got {type(master_seed).__name__}")
    if not path:
        raise ValueError("substream requires at least one path component")
    spawn_key = tuple(_path_key(p) for p in path)
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(seq))
