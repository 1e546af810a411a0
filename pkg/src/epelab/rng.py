"""Deterministic stream derivation.

Every stochastic component in the package draws from a generator derived
from (master seed, component labels...). Streams with distinct label paths
are statistically independent, and a stream's identity never depends on
how many draws other streams have consumed. That is what makes trials
reproducible regardless of scheduling order.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_to_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    digest = hashlib.sha256(repr(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def as_entropy(seed) -> tuple[int, ...]:
    """Normalize a seed (int, str, or tuple of labels) to an entropy tuple."""
    if isinstance(seed, tuple):
        return tuple(_label_to_int(x) for x in seed)
    return (_label_to_int(seed),)


def derive_entropy(base: tuple[int, ...], *labels) -> tuple[int, ...]:
    return base + tuple(_label_to_int(x) for x in labels)


def make_rng(seed) -> np.random.Generator:
    """Build a PCG64 generator from a seed or tuple of seed labels."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(as_entropy(seed)))))
