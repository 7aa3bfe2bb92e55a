"""Uniform random phase-order generation."""

from __future__ import annotations

from .catalog import Origin, PassCatalog, PassSequence


def generate_random(catalog: PassCatalog, count: int, length: int, rng) -> list[PassSequence]:
    """Draw *count* sequences of exactly *length* passes.

    Each position is an independent uniform draw from the catalog; repeats
    within and across sequences are allowed.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if length < 1:
        raise ValueError("length must be >= 1")
    n = len(catalog)
    return [
        catalog.from_indices(rng.below_many(n, length), Origin.RANDOM)
        for _ in range(count)
    ]
