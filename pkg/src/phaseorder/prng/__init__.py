"""Seedable ARC4 generator used for every random draw in a campaign.

The compiled core (``_arc4``) is used when it was built; otherwise the
pure-Python implementation is loaded. Set ``PHASEORDER_PURE_PYTHON=1`` to
force the fallback.
"""

from __future__ import annotations

import os

from . import _arc4_py

if os.environ.get("PHASEORDER_PURE_PYTHON"):
    Arc4 = _arc4_py.Arc4
    IMPLEMENTATION = "python"
else:
    try:
        from ._arc4 import Arc4  # type: ignore[no-redef]

        IMPLEMENTATION = "cython"
    except ImportError:
        Arc4 = _arc4_py.Arc4
        IMPLEMENTATION = "python"


def seed(key: bytes | str) -> "Arc4":
    """Key-schedule a fresh generator. String keys are UTF-8 encoded."""
    if isinstance(key, str):
        key = key.encode("utf-8")
    if not key:
        raise ValueError("ARC4 key must not be empty")
    return Arc4(key)


def next_below(rng: "Arc4", n: int) -> int:
    """Uniform integer in ``[0, n)``; rejection-sampled 32-bit big-endian words."""
    return rng.next_below(n)


def derive(base: str, *labels: object) -> "Arc4":
    """Independent generator for a named sub-stream of a campaign seed."""
    return seed("/".join([base, *map(str, labels)]))


__all__ = ["Arc4", "IMPLEMENTATION", "derive", "next_below", "seed"]
