"""Deterministic seed derivation.

All randomness in the package flows from explicit integer seeds through
:func:`derive_seed` / :func:`derive_rng`.  A derived stream is identified by
the base seed plus a path of labels (strings are hashed with CRC32, ints pass
through), e.g. ``derive_rng(seed, "gen", 2, "child", 7)``.  Distinct paths
give statistically independent streams via ``numpy.random.SeedSequence``, and
the same path always reproduces the same stream, independent of call order.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["derive_seed", "derive_rng"]


def _path_entry(part: int | str) -> int:
    if isinstance(part, bool):  # bool is an int subclass; be explicit
        return int(part)
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"seed path entries must be int or str, got {type(part)!r}")


def derive_rng(seed: int, *path: int | str) -> np.random.Generator:
    """Return a ``numpy`` Generator for the stream named by ``path``."""
    entries = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_path_entry(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(entries))


def derive_seed(seed: int, *path: int | str) -> int:
    """Return a non-negative 63-bit integer seed for the stream named by ``path``."""
    entries = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_path_entry(p) for p in path]
    words = np.random.SeedSequence(entries).generate_state(2, dtype=np.uint64)
    return int(words[0] ^ (words[1] << 1)) & 0x7FFFFFFFFFFFFFFF
