"""Deterministic named random substreams.

Everything stochastic in this package draws from a generator built here,
so one master seed plus a handful of stable labels pins down every random
quantity: the sampled instance, physical noise, masking noise, plaintexts,
and any per-task index a worker pool hands out.  Labels are hashed with
crc32, which is stable across platforms and Python versions, unlike the
builtin ``hash``.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["substream", "stream_keys"]


def stream_keys(*keys) -> tuple[int, ...]:
    """Normalize mixed int/str keys to a tuple of ints for SeedSequence."""
    out = []
    for k in keys:
        if isinstance(k, str):
            out.append(zlib.crc32(k.encode("utf-8")))
        elif isinstance(k, (int, np.integer)):
            out.append(int(k))
        elif isinstance(k, (tuple, list)):
            out.extend(stream_keys(*k))
        else:
            raise TypeError(f"stream key must be int, str, or a nesting of them, got {type(k)}")
    return tuple(out)


def substream(*keys) -> np.random.Generator:
    """Generator for the named stream; same keys always give the same stream."""
    if not keys:
        raise ValueError("need at least one stream key")
    return np.random.default_rng(np.random.SeedSequence(stream_keys(*keys)))
