"""Reproducible standard-Gaussian draws from a counter-based stream.

Samples are produced in fixed-size chunks. Chunk ``c`` of seed ``s`` uses a
Philox generator keyed by ``s + (c << 64)``, so any chunk can be generated
independently (and on any worker) with identical results. Uniforms are formed
from the top 53 bits of each raw 64-bit output as ``(k + 0.5) / 2**53`` and
mapped through the inverse normal CDF.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from .errors import DomainError

_SCALE = 2.0**-53
MAX_SEED = 2**64 - 1


def gaussian_chunk(seed: int, chunk: int, count: int, dim: int) -> np.ndarray:
    """Array of shape ``(count, dim)`` holding chunk ``chunk`` of the stream ``seed``."""
    if not 0 <= seed <= MAX_SEED:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if chunk < 0 or count < 0 or dim < 0:
        raise DomainError("chunk, count and dim must be nonnegative")
    gen = np.random.Philox(key=int(seed) + (int(chunk) << 64))
    raw = gen.random_raw(count * dim) >> np.uint64(11)
    u = (raw.astype(np.float64) + 0.5) * _SCALE
    return ndtri(u).reshape(count, dim)


def gaussian_samples(seed: int, n: int, dim: int, chunk_size: int = 4096) -> np.ndarray:
    """First ``n`` draws of the stream, concatenated chunk by chunk."""
    if n < 0:
        raise DomainError("sample count must be nonnegative")
    parts = []
    for c, start in enumerate(range(0, n, chunk_size)):
        parts.append(gaussian_chunk(seed, c, min(chunk_size, n - start), dim))
    return np.concatenate(parts) if parts else np.zeros((0, dim))
